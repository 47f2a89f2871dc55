import numpy as np
import pytest

from twotime import chi, solver
from twotime.errors import NonFinite
from twotime.grid import bind_constants, make_grid, random_endpoints, sample_collocation_sets
from twotime.kernel import KernelConfig
from twotime.scenario import Scenario
from twotime.suites import perturbed_free, separability_run

from conftest import random_coeffs


@pytest.fixture
def small():
    g = make_grid(1, 1, 0.25)
    trajs = sample_collocation_sets(g, random_endpoints(8, seed=1), 2, seed=1)
    return g, trajs


def test_free_start_is_fixed_point(small):
    g, trajs = small
    const = bind_constants(g, m1=1.0, m2=2.0)
    free = chi.free_particle_chi(g, [1, 0, 0], [2, 0, 0], const)
    rep = solver.solve(free, trajs, KernelConfig(), const)
    assert rep.converged and rep.iterations == 0
    assert rep.final_objective <= 1e-20
    assert np.array_equal(rep.final_coeffs.to_vector(), free.to_vector())


def test_separability_recovered():
    sc = Scenario(T1=1, T2=1, epsilon=0.25, n_endpoint_sets=16, n_trajectories=4)
    start, rep = separability_run(sc)
    assert start.block_norm("s11", "r11") == pytest.approx(1e-2)
    assert rep.converged
    assert rep.final_coeffs.block_norm("s11", "r11") <= 1e-8


def test_weak_coupling_small_grid(small):
    g, trajs = small
    const = bind_constants(g, e1e2=1e-3)
    rep = solver.solve(chi.ChiCoefficients.zeros(g), trajs, KernelConfig(sigma=1e-2, e1e2=1e-3), const,
                       tol=1e-10)
    assert rep.converged and rep.relative_residual <= 1e-10
    assert np.all(np.diff(rep.residual_history) <= 0)
    assert len(rep.damping_history) == len(rep.residual_history)
    d = rep.to_dict()
    assert d["converged"] and len(d["lambda"]) == 2


def test_gauge_mask_fixes_corner_cross_blocks():
    g = make_grid(1, 1, 0.5)
    mask = solver.gauge_mask(g).reshape(g.node_shape + (chi.NPARAM,))
    assert mask.sum() == 2 * 2 * 9
    assert mask[0, 0, chi.SLICES["s11"]].all() and mask[-1, -1, chi.SLICES["r11"]].all()
    assert not mask[1, 1].any()


@pytest.mark.parametrize("kwargs,exc", [({"tol": 0.0}, ValueError), ({"tol": -1.0}, ValueError)])
def test_solve_argument_validation(small, kwargs, exc):
    g, trajs = small
    with pytest.raises(exc):
        solver.solve(chi.ChiCoefficients.zeros(g), trajs, KernelConfig(), bind_constants(g), **kwargs)


def test_solve_needs_four_trajectories(small):
    g, trajs = small
    with pytest.raises(ValueError):
        solver.solve(chi.ChiCoefficients.zeros(g), trajs[:3], KernelConfig(), bind_constants(g))


def test_solve_rejects_nonfinite_start(small):
    g, trajs = small
    v = np.zeros(g.node_shape + (chi.NPARAM,))
    v[1, 1, 0] = np.nan
    with pytest.raises(NonFinite):
        solver.solve(chi.ChiCoefficients.from_vector(g, v), trajs, KernelConfig(), bind_constants(g))


def test_gradient_vanishes_at_exact_solutions(small):
    g, trajs = small
    const = bind_constants(g, m1=1.0, m2=2.0)
    zero = solver.gradient_check(chi.ChiCoefficients.zeros(g), trajs, KernelConfig(), const, n_dirs=2)
    assert zero["gradient_norm"] == 0
    free = chi.free_particle_chi(g, [1, 0, 0], [2, 0, 0], const)
    assert solver.gradient_check(free, trajs, KernelConfig(), const, n_dirs=2)["gradient_norm"] <= 1e-12


@pytest.mark.parametrize("seed", [0, 1])
def test_gradient_matches_finite_differences(small, seed):
    g, trajs = small
    const = bind_constants(g, m1=1.0, m2=2.0, e1e2=0.1)
    coeffs = random_coeffs(g, seed=seed, scale=0.2)
    rep = solver.gradient_check(coeffs, trajs, KernelConfig(sigma=0.05, e1e2=0.1), const, seed=seed)
    assert rep["directions"] == 20
    assert rep["max_relative_deviation"] <= 1e-6


def test_perturbed_free_scales_cross_blocks():
    g = make_grid(1, 1, 0.5)
    const = bind_constants(g)
    c = perturbed_free(g, [1, 0, 0], [0, 1, 0], const, norm=3e-3, seed=2)
    assert c.block_norm("s11", "r11") == pytest.approx(3e-3)
