"""Named verification suites driven by a Scenario."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import action, chi, kernel, solver
from .action import PrefactorConvention
from .convergence import observed_order
from .energy import estimate_energy
from .grid import Trajectory, bind_constants, make_grid, random_endpoints
from .scenario import ResultWriter, Scenario, workers

SUITES = ("kernel", "convergence", "hermiticity", "solve", "energy")
CONVERGENCE_EPSILONS = (0.2, 0.1, 0.05, 0.025)


def criterion(name, value, passed, threshold=None) -> dict:
    return {"name": name, "value": value, "threshold": threshold, "passed": bool(passed)}


def smooth_coefficients(grid) -> chi.ChiCoefficients:
    """A fixed coefficient field, at most quadratic in both times."""
    def blocks(t1, t2):
        one = np.ones_like(t1)
        vec = lambda a, b, c: np.stack([a * one, b * one, c * one], axis=-1)
        A = np.array([[0.2, 0.05, 0.0], [0.05, 0.1, 0.02], [0.0, 0.02, 0.3]])
        B = np.array([[0.1, -0.2, 0.05], [0.0, 0.15, 0.1], [0.2, 0.0, -0.1]])
        return {
            "s00": 0.1 * t1 * t2,
            "s10": vec(0.5 + 0.2 * t1 + 0.1 * t2 ** 2, -0.3 + 0.1 * t1 * t2, 0.2 * t2),
            "s01": vec(0.1 * t1 ** 2, 0.4 - 0.2 * t2, 0.3 * t1),
            "r10": vec(0.05 * t2, 0.02 * t1, -0.04),
            "r01": vec(-0.03 * t1, 0.01, 0.02 * t2 ** 2),
            "s20": (1 + 0.3 * t1 - 0.1 * t2)[..., None, None] * A,
            "s02": (0.5 - 0.2 * t1 * t2)[..., None, None] * A.T,
            "r20": (0.1 * t2)[..., None, None] * A,
            "r02": (0.05 * t1)[..., None, None] * A,
            "s11": (1 + t1 - t2)[..., None, None] * B,
            "r11": (0.1 * t1 * t2)[..., None, None] * B.T,
        }
    return chi.ChiCoefficients.from_function(grid, blocks)


def smooth_trajectory(grid) -> Trajectory:
    def path(t, T, a, b, u, w):
        s = (t / T)[:, None]
        return (1 - s) * a + s * b + np.sin(math.pi * s) * u + 0.2 * np.sin(2 * math.pi * s) * w
    x1 = path(grid.t1, grid.T1, np.array([0.1, 0.2, -0.1]), np.array([0.6, -0.3, 0.2]),
              np.array([0.3, 0.1, -0.2]), np.array([0.0, 0.2, 0.1]))
    x2 = path(grid.t2, grid.T2, np.array([-0.2, 0.1, 0.3]), np.array([0.4, 0.5, -0.2]),
              np.array([-0.1, 0.25, 0.1]), np.array([0.2, 0.0, -0.1]))
    return Trajectory(x1, x2)


def _map(fn, items):
    n = workers()
    if n == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(n) as pool:
        return list(pool.map(fn, items))


# --- suites --------------------------------------------------------------------

def run_kernel(sc: Scenario, w: ResultWriter):
    t1, r, T2 = 5.0, 0.5, 10.0
    sigmas = kernel.sigma_sequence(1e-2, 1e-6)
    limit = kernel.sharp_time_integral(t1, r, T2)
    values = _map(lambda s: kernel.coulomb_time_integral(
        t1, r, T2, kernel.KernelConfig(sigma=s, coupling_prefactor=sc.coupling_prefactor)), sigmas)
    errors = [abs(v - limit) for v in values]
    w.table("kernel_sigma_sweep.tsv", ["sigma", "value", "abs_error"],
            np.column_stack([sigmas, values, errors]))
    order = observed_order(np.sqrt(sigmas), errors)
    crit = [
        criterion("limit_within_1e-3", errors[-1], errors[-1] <= 1e-3, 1e-3),
        criterion("order_in_sqrt_sigma_in_[0.8,1.2]", order, 0.8 <= order <= 1.2, [0.8, 1.2]),
    ]
    return crit, {"limit": limit, "values": values, "order_in_sqrt_sigma": order,
                  "order_in_sigma": observed_order(sigmas, errors)}


def convergence_study(T1, T2, epsilons, constants_kw, convention=PrefactorConvention.EQ29):
    rows = []
    for eps in epsilons:
        g = make_grid(T1, T2, eps)
        const = bind_constants(g, **constants_kw)
        coeffs = smooth_coefficients(g)
        traj = smooth_trajectory(g)
        disc = action.canonical_part_discrete(coeffs, traj, const)
        cont = action.canonical_part_continuum(coeffs, traj, convention, const)
        rows.append((eps, disc, cont, abs(disc - cont)))
    return rows


def run_convergence(sc: Scenario, w: ResultWriter):
    rows = convergence_study(sc.T1, sc.T2, CONVERGENCE_EPSILONS,
                             {"hbar": sc.hbar, "m1": sc.m1, "m2": sc.m2},
                             sc.prefactor_convention())
    eps = [r[0] for r in rows]
    diff = [r[3] for r in rows]
    w.table("convergence.tsv", ["epsilon", "discrete_re", "discrete_im", "continuum_re",
                                "continuum_im", "abs_difference"],
            [(r[0], r[1].real, r[1].imag, r[2].real, r[2].imag, r[3]) for r in rows])
    order = observed_order(eps, diff)
    monotone = all(b < a for a, b in zip(diff, diff[1:]))
    crit = [criterion("order_at_least_1", order, order >= 1.0 and monotone, 1.0)]
    return crit, {"order": order, "differences": diff}


def run_hermiticity(sc: Scenario, w: ResultWriter):
    g = make_grid(sc.epsilon, sc.epsilon, sc.epsilon)
    coupling = sc.e1e2 if sc.e1e2 != 0 else 1.0
    rows, crit = [], []
    for points in (8, 16):
        for e in (0.0, coupling):
            const = bind_constants(g, sc.hbar, sc.m1, sc.m2, e)
            kcfg = kernel.KernelConfig(sc.sigma, sc.coupling_prefactor, e)
            H = action.hamiltonian_matrix_tiny(g, points, kcfg, const)
            asym = float(np.max(np.abs(H - H.T)))
            rows.append((points, e, H.shape[0], asym))
            crit.append(criterion(f"symmetric_p{points}_e{e:g}", asym, asym <= 1e-12, 1e-12))
    # exchange symmetry with equal masses
    const = bind_constants(g, sc.hbar, sc.m1, sc.m1, coupling)
    H = action.hamiltonian_matrix_tiny(g, 8, kernel.KernelConfig(sc.sigma, sc.coupling_prefactor, coupling), const)
    P = action.exchange_permutation(g, 8)
    exch = float(np.max(np.abs(P @ H @ P.T - H)))
    crit.append(criterion("exchange_symmetric_equal_masses", exch, exch <= 1e-12, 1e-12))
    w.table("hermiticity.tsv", ["spatial_points", "e1e2", "dimension", "max_asymmetry"], rows)
    return crit, {"rows": rows, "exchange_deviation": exch}


def weak_coupling_runs(sc: Scenario, couplings):
    g = sc.grid()
    trajs = sc.collocation(g)
    conv = sc.prefactor_convention()
    reports = []
    for e in couplings:
        const = bind_constants(g, sc.hbar, sc.m1, sc.m2, e)
        kcfg = kernel.KernelConfig(sc.sigma, sc.coupling_prefactor, e)
        reports.append(solver.solve(chi.ChiCoefficients.zeros(g), trajs, kcfg, const, conv,
                                    tol=sc.tol, max_iter=sc.max_iter))
    return reports


def run_solve(sc: Scenario, w: ResultWriter):
    e = sc.e1e2 if sc.e1e2 != 0 else 1e-3
    couplings = (0.0, e, 2 * e)
    reps = weak_coupling_runs(sc, couplings)
    crit = []
    for c, rep in zip(couplings[1:], reps[1:]):
        h = rep.residual_history
        crit.append(criterion(f"converged_e{c:g}", rep.relative_residual,
                              rep.converged and rep.relative_residual <= sc.tol, sc.tol))
        crit.append(criterion(f"monotone_e{c:g}", bool(np.all(np.diff(h) <= 0)),
                              bool(np.all(np.diff(h) <= 0))))
    shift1 = reps[1].lam.real - reps[0].lam.real
    shift2 = reps[2].lam.real - reps[0].lam.real
    ratio = shift2 / shift1 if shift1 != 0 else float("inf")
    crit.append(criterion("lambda_shift_linear_within_20pct", ratio, abs(ratio / 2 - 1) <= 0.2, [1.6, 2.4]))
    hist = reps[1].residual_history
    w.table("solve_history.tsv", ["iteration", "objective"], list(enumerate(hist)))
    chi.save_coefficients(w.path("solve_coefficients.tsv"), reps[1].final_coeffs, w.header)
    runs = [{"e1e2": c, **r.to_dict()} for c, r in zip(couplings, reps)]
    return crit, {"runs": runs, "lambda_shift_ratio": ratio}


def free_energy_estimate(sc: Scenario):
    const = bind_constants(make_grid(1, 1, 1), sc.hbar, sc.m1, sc.m2, 0.0)

    def solve_at(T):
        g = make_grid(T, T, T / 8)
        return chi.free_particle_chi(g, sc.p1, sc.p2, const)

    ends = [(e[1], e[3]) for e in random_endpoints(sc.n_energy_endpoints, seed=sc.seed)]
    return estimate_energy(solve_at, sc.T_sequence, ends, const), chi.free_particle_energy(sc.p1, sc.p2, const)


def run_energy(sc: Scenario, w: ResultWriter):
    est, exact = free_energy_estimate(sc)
    est.save(w.path("energy.tsv"), w.header)
    crit = [
        criterion("W_matches_free_value", abs(est.W - exact), abs(est.W - exact) <= 1e-10, 1e-10),
        criterion("endpoint_spread", est.endpoint_spread, est.endpoint_spread <= 1e-12, 1e-12),
        criterion("fit_slope", abs(est.slope), abs(est.slope) <= 1e-12, 1e-12),
    ]
    return crit, {"W": est.W, "expected": exact, "W_of_T": est.W_of_T}


RUNNERS = {
    "kernel": run_kernel,
    "convergence": run_convergence,
    "hermiticity": run_hermiticity,
    "solve": run_solve,
    "energy": run_energy,
}


# --- free-particle validation ---------------------------------------------------

def validate_free(sc: Scenario, tol: float | None = None) -> dict:
    """Check both prefactor conventions against the additive free solution.

    A convention passes when the coordinate-dependent residual vanishes on
    every collocation trajectory and its continuum canonical part reproduces
    the slice-by-slice canonical sum, both below ``tol``.
    """
    tol = sc.validate_tol if tol is None else tol
    g = sc.grid()
    const = sc.constants(g)
    kcfg = sc.kernel()
    coeffs = chi.free_particle_chi(g, sc.p1, sc.p2, const)
    trajs = sc.collocation(g)
    results = {}
    for conv in PrefactorConvention:
        field = action.residual_W_chi(coeffs, trajs, kcfg, const, conv)
        consistency = max(abs(action.canonical_part_continuum(coeffs, t, conv, const)
                              - action.canonical_part_discrete(coeffs, t, const)) for t in trajs)
        results[conv.value] = {
            "max_residual": field.max_abs,
            "max_canonical_mismatch": consistency,
            "passed": field.max_abs < tol and consistency < tol,
            "field": field,
        }
    return results


# --- separability ----------------------------------------------------------------

def perturbed_free(grid, p1, p2, constants, norm: float = 1e-2, seed: int = 0) -> chi.ChiCoefficients:
    """Free coefficients plus random cross blocks whose largest entry is ``norm``."""
    rng = np.random.default_rng(seed)
    free = chi.free_particle_chi(grid, p1, p2, constants)
    shape = grid.node_shape + (3, 3)
    s11 = rng.uniform(-1, 1, shape)
    r11 = rng.uniform(-1, 1, shape)
    scale = norm / max(np.abs(s11).max(), np.abs(r11).max())
    return free.replace(s11=scale * s11, r11=scale * r11)


def separability_run(sc: Scenario, norm: float = 1e-2, tol: float = 1e-16, max_iter: int = 100):
    """Solve at zero coupling from a cross-perturbed free start."""
    g = sc.grid()
    const = bind_constants(g, sc.hbar, sc.m1, sc.m2, 0.0)
    kcfg = kernel.KernelConfig(sc.sigma, sc.coupling_prefactor, 0.0)
    start = perturbed_free(g, sc.p1, sc.p2, const, norm, sc.seed)
    rep = solver.solve(start, sc.collocation(g), kcfg, const, sc.prefactor_convention(),
                       tol=tol, max_iter=max_iter)
    return start, rep
