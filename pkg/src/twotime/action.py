"""Auxiliary functional and the two-time residual operator.

The auxiliary functional ``Lambda = (I Psi)/Psi`` is evaluated on broken-line
trajectories as a double Riemann sum over cells ``n1 = 1..N1``,
``n2 = 1..N2`` of an integrand made of

* boundary differences of ``chi`` and ``-d chi/dt1 - d chi/dt2`` (canonical part),
* the kinetic bracket with its cross-time integrals (Hamiltonian part),
* the regularized light-cone Coulomb density.

Its trajectory-independent piece is the eigenvalue ``lambda``; the rest is
the residual ``W chi`` whose vanishing is the two-time wave equation.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import chi as chimod
from .chi import NPARAM, ChiCoefficients
from .errors import DimensionTooLarge
from .grid import Constants, TimeGrid, Trajectory
from .kernel import KernelConfig, coulomb_density, regularized_delta


class PrefactorConvention(enum.Enum):
    """Weights of the boundary and time-derivative terms.

    ``EQ23``: ``1/(T1 T2)`` on both boundary pairs, ``1/T2`` and ``1/T1`` on
    the time derivatives. ``EQ29``: ``1/T1`` and ``1/T2`` on the boundary
    pairs, unit weight on the derivatives.
    """

    EQ23 = "eq23"
    EQ29 = "eq29"

    def weights(self, grid: TimeGrid) -> tuple[float, float, float, float]:
        """``(boundary1, boundary2, dt1, dt2)`` weights."""
        T1, T2 = grid.T1, grid.T2
        if self is PrefactorConvention.EQ23:
            return 1 / (T1 * T2), 1 / (T1 * T2), 1 / T2, 1 / T1
        return 1 / T1, 1 / T2, 1.0, 1.0


VALIDATED_CONVENTION = PrefactorConvention.EQ29


def _stack(trajs, grid: TimeGrid):
    for t in trajs:
        t.check(grid)
    X1 = np.stack([t.x1 for t in trajs])
    X2 = np.stack([t.x2 for t in trajs])
    return X1, X2


def _node_coeffs(coeffs: ChiCoefficients) -> np.ndarray:
    return coeffs.to_vector().reshape(coeffs.grid.node_shape + (NPARAM,))


def _contract(feat, c):
    return np.sum(feat * c, axis=-1)


@dataclass
class IntegrandParts:
    """Per-cell integrand pieces, each of shape ``(K, N1, N2)``."""

    canonical: np.ndarray
    kinetic: np.ndarray
    coulomb: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.canonical + self.kinetic + self.coulomb


def integrand(coeffs: ChiCoefficients, X1, X2, kernel: KernelConfig, constants: Constants,
              convention: PrefactorConvention = VALIDATED_CONVENTION,
              literal_zero_endpoint: bool = False) -> IntegrandParts:
    """Evaluate the cell integrand of ``Lambda`` for stacked trajectories.

    ``X1`` has shape ``(K, N1+1, 3)`` and ``X2`` ``(K, N2+1, 3)``. With
    ``literal_zero_endpoint`` the second boundary pair uses ``x2^T2`` at
    ``t2 = 0`` as printed, instead of ``x2^0``.
    """
    g = coeffs.grid
    hbar, eps = constants.hbar, g.epsilon
    C = _node_coeffs(coeffs)
    d1C, d2C = chimod.time_derivatives(coeffs)
    wb1, wb2, wd1, wd2 = convention.weights(g)

    x1c = X1[:, 1:, None, :]          # (K, N1, 1, 3)
    x2c = X2[:, None, 1:, :]          # (K, 1, N2, 3)
    x10, x1T = X1[:, 0], X1[:, -1]
    x20, x2T = X2[:, 0], X2[:, -1]
    x2_low = x2T if literal_zero_endpoint else x20

    phi = chimod.value_features(x1c, x2c, hbar)                      # (K, N1, N2, P)
    dchi = wd1 * _contract(phi, d1C[1:, 1:]) + wd2 * _contract(phi, d2C[1:, 1:])

    b1 = (_contract(chimod.value_features(x1T[:, None, :], X2[:, 1:], hbar), C[-1, 1:])
          - _contract(chimod.value_features(x10[:, None, :], X2[:, 1:], hbar), C[0, 1:]))
    b2 = (_contract(chimod.value_features(X1[:, 1:], x2T[:, None, :], hbar), C[1:, -1])
          - _contract(chimod.value_features(X1[:, 1:], x2_low[:, None, :], hbar), C[1:, 0]))
    canonical = (hbar / 1j) * (wb1 * b1[:, None, :] + wb2 * b2[:, :, None] - dchi)

    kinetic = np.zeros_like(canonical)
    for particle, m, axis in ((1, constants.m1, 2), (2, constants.m2, 1)):
        grad = np.einsum("...kp,...p->...k",
                         chimod.grad_features(x1c, x2c, hbar, particle), C[1:, 1:])
        cross = eps * np.sum(grad, axis=axis, keepdims=True)
        lap = chimod.lap_features(hbar, particle) @ C[1:, 1:].reshape(-1, NPARAM).T
        lap = lap.reshape(g.N1, g.N2)
        kinetic = kinetic - hbar ** 2 / (2 * m) * (np.sum(grad * cross, axis=-1) - lap)

    if kernel.e1e2 == 0.0:
        coulomb = np.zeros(canonical.shape)
    else:
        t1 = g.t1[1:, None]
        t2 = g.t2[None, 1:]
        coulomb = coulomb_density(t1, t2, x1c, x2c, kernel) * np.ones(canonical.shape)
    return IntegrandParts(canonical, kinetic, coulomb.astype(complex))


def _single(traj: Trajectory):
    return traj.x1[None], traj.x2[None]


def canonical_part_discrete(coeffs: ChiCoefficients, traj: Trajectory, constants: Constants) -> complex:
    """``(hbar/i) sum_n (x(n) - x(n-1)) . d ln Psi / d x(n)`` for both particles.

    ``d ln Psi / d x1(n1) = epsilon * sum_n2 d chi/d x1`` at the cell values.
    """
    g = coeffs.grid
    traj.check(g)
    hbar, eps = constants.hbar, g.epsilon
    C = _node_coeffs(coeffs)[1:, 1:]
    x1c = traj.x1[1:, None, :]
    x2c = traj.x2[None, 1:, :]
    g1 = np.einsum("abkp,abp->abk", chimod.grad_features(x1c, x2c, hbar, 1), C)
    g2 = np.einsum("abkp,abp->abk", chimod.grad_features(x1c, x2c, hbar, 2), C)
    dlog1 = eps * g1.sum(axis=1)          # (N1, 3)
    dlog2 = eps * g2.sum(axis=0)          # (N2, 3)
    dx1 = np.diff(traj.x1, axis=0)
    dx2 = np.diff(traj.x2, axis=0)
    return complex((hbar / 1j) * (np.sum(dx1 * dlog1) + np.sum(dx2 * dlog2)))


def canonical_part_continuum(coeffs: ChiCoefficients, traj: Trajectory,
                             convention: PrefactorConvention, constants: Constants,
                             literal_zero_endpoint: bool = False) -> complex:
    g = coeffs.grid
    X1, X2 = _single(traj)
    parts = integrand(coeffs, X1, X2, KernelConfig(), constants, convention, literal_zero_endpoint)
    return complex(g.epsilon ** 2 * parts.canonical.sum())


def hamiltonian_part(coeffs: ChiCoefficients, traj: Trajectory, kernel: KernelConfig,
                     constants: Constants) -> complex:
    """Kinetic bracket with cross-time sums plus the Coulomb double sum."""
    g = coeffs.grid
    X1, X2 = _single(traj)
    parts = integrand(coeffs, X1, X2, kernel, constants)
    return complex(g.epsilon ** 2 * (parts.kinetic.sum() + parts.coulomb.sum()))


def auxiliary_functional(coeffs: ChiCoefficients, traj: Trajectory, kernel: KernelConfig,
                         constants: Constants,
                         convention: PrefactorConvention = VALIDATED_CONVENTION) -> complex:
    """Full ``Lambda`` on one trajectory."""
    X1, X2 = _single(traj)
    parts = integrand(coeffs, X1, X2, kernel, constants, convention)
    return complex(coeffs.grid.epsilon ** 2 * parts.total.sum())


# --- scalar part -----------------------------------------------------------

def scalar_density(coeffs: ChiCoefficients, kernel: KernelConfig, constants: Constants,
                   convention: PrefactorConvention = VALIDATED_CONVENTION) -> np.ndarray:
    """``f(t1, t2)``: the cell integrand with every coordinate, end points included, at zero."""
    g = coeffs.grid
    X1 = np.zeros((1, g.N1 + 1, 3))
    X2 = np.zeros((1, g.N2 + 1, 3))
    return integrand(coeffs, X1, X2, kernel, constants, convention).total[0]


def scalar_part_lambda(coeffs: ChiCoefficients, grid: TimeGrid, kernel: KernelConfig,
                       constants: Constants,
                       convention: PrefactorConvention = VALIDATED_CONVENTION) -> complex:
    """Eigenvalue ``lambda = sum epsilon^2 f``; the physical value is its real part."""
    chimod._same_grid(coeffs.grid, grid)
    return complex(grid.epsilon ** 2 * scalar_density(coeffs, kernel, constants, convention).sum())


def literal_scalar_density(coeffs: ChiCoefficients, kernel: KernelConfig,
                           constants: Constants) -> np.ndarray:
    """``f(t1, t2)`` assembled term by term as printed, for cross-checking.

    Uses ``1/T1, 1/T2`` boundary weights, no time-derivative term, trace of
    the ``epsilon r`` quadratic blocks and unit Coulomb prefactor.
    """
    g = coeffs.grid
    eps, hbar = g.epsilon, constants.hbar
    s00 = coeffs.s00
    f = ((s00[-1, 1:] - s00[0, 1:])[None, :] / g.T1
         + (s00[1:, -1] - s00[1:, 0])[:, None] / g.T2)
    s10, r10 = coeffs.s10[1:, 1:], coeffs.r10[1:, 1:]
    s01, r01 = coeffs.s01[1:, 1:], coeffs.r01[1:, 1:]
    tr20 = np.trace(coeffs.r20[1:, 1:], axis1=-2, axis2=-1)
    tr02 = np.trace(coeffs.r02[1:, 1:], axis1=-2, axis2=-1)
    f = f + (np.sum(s10 * eps * s10.sum(axis=1, keepdims=True), axis=-1)
             - hbar ** 2 * np.sum(r10 * eps * r10.sum(axis=1, keepdims=True), axis=-1)
             - hbar ** 2 * tr20) / (2 * constants.m1)
    f = f + (np.sum(s01 * eps * s01.sum(axis=0, keepdims=True), axis=-1)
             - hbar ** 2 * np.sum(r01 * eps * r01.sum(axis=0, keepdims=True), axis=-1)
             - hbar ** 2 * tr02) / (2 * constants.m2)
    if kernel.e1e2 != 0.0:
        dt = g.t1[1:, None] - g.t2[None, 1:]
        f = f + kernel.e1e2 * regularized_delta(dt ** 2, kernel.sigma)
    return f.astype(complex)


def lambda_report(coeffs: ChiCoefficients, kernel: KernelConfig, constants: Constants,
                  convention: PrefactorConvention = VALIDATED_CONVENTION) -> dict:
    g = coeffs.grid
    derived = scalar_part_lambda(coeffs, g, kernel, constants, convention)
    literal = complex(g.epsilon ** 2 * literal_scalar_density(coeffs, kernel, constants).sum())
    return {
        "lambda": derived,
        "physical": derived.real,
        "imaginary": derived.imag,
        "literal": literal,
        "discrepancy": abs(derived - literal),
    }


# --- residual ----------------------------------------------------------------

@dataclass
class ResidualField:
    """Coordinate-dependent part of ``W chi`` per trajectory and cell, plus ``lambda``."""

    residual: np.ndarray      # (K, N1, N2) complex
    lam: complex
    grid: TimeGrid

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0

    def objective(self) -> float:
        return float(self.grid.epsilon ** 2 * np.sum(np.abs(self.residual) ** 2))

    def to_table(self) -> np.ndarray:
        K, N1, N2 = self.residual.shape
        k, a, b = np.meshgrid(np.arange(K), np.arange(1, N1 + 1), np.arange(1, N2 + 1), indexing="ij")
        r = self.residual.ravel()
        return np.column_stack([k.ravel(), a.ravel(), b.ravel(), r.real, r.imag])

    def save(self, path, header: str = "") -> None:
        lines = ([header] if header else []) + [
            f"lambda {self.lam.real!r} {self.lam.imag!r}", "traj\tn1\tn2\tre\tim"]
        np.savetxt(path, self.to_table(), fmt=["%d", "%d", "%d", "%.17g", "%.17g"],
                   delimiter="\t", header="\n".join(lines))


def reference_arrays(X1, X2):
    """Interior vertices zeroed, end points kept."""
    R1 = np.zeros_like(X1)
    R2 = np.zeros_like(X2)
    R1[:, [0, -1]] = X1[:, [0, -1]]
    R2[:, [0, -1]] = X2[:, [0, -1]]
    return R1, R2


def residual_cells(coeffs, X1, X2, kernel, constants, convention, literal_zero_endpoint=False):
    """``integrand(trajectory) - integrand(reference)`` for stacked trajectories."""
    R1, R2 = reference_arrays(X1, X2)
    full = integrand(coeffs, X1, X2, kernel, constants, convention, literal_zero_endpoint).total
    ref = integrand(coeffs, R1, R2, kernel, constants, convention, literal_zero_endpoint).total
    return full - ref


def residual_W_chi(coeffs: ChiCoefficients, trajs, kernel: KernelConfig, constants: Constants,
                   convention: PrefactorConvention = VALIDATED_CONVENTION,
                   literal_zero_endpoint: bool = False) -> ResidualField:
    if len(trajs) < 1:
        raise ValueError("at least one trajectory is required")
    X1, X2 = _stack(trajs, coeffs.grid)
    res = residual_cells(coeffs, X1, X2, kernel, constants, convention, literal_zero_endpoint)
    lam = scalar_part_lambda(coeffs, coeffs.grid, kernel, constants, convention)
    return ResidualField(res, lam, coeffs.grid)


class ResidualOperator:
    """Residual of a fixed collocation set as a function of packed coefficients.

    The residual is affine in the coefficients except for the kinetic
    cross-time product, which is bilinear. The affine Jacobian is assembled
    once; the bilinear part is linearized at each call to ``jacobian``.
    """

    def __init__(self, grid: TimeGrid, trajs, kernel: KernelConfig, constants: Constants,
                 convention: PrefactorConvention = VALIDATED_CONVENTION,
                 literal_zero_endpoint: bool = False):
        self.grid = grid
        self.kernel = kernel
        self.constants = constants
        self.convention = convention
        self.literal = literal_zero_endpoint
        self.X1, self.X2 = _stack(trajs, grid)
        self.K = self.X1.shape[0]
        self.R1, self.R2 = reference_arrays(self.X1, self.X2)
        self.n_rows = self.K * grid.N1 * grid.N2
        self.n_nodes = (grid.N1 + 1) * (grid.N2 + 1)
        self.n_params = self.n_nodes * NPARAM
        self._grad_feats = {}
        for tag, A1, A2 in (("traj", self.X1, self.X2), ("ref", self.R1, self.R2)):
            x1c = A1[:, 1:, None, :]
            x2c = A2[:, None, 1:, :]
            for p in (1, 2):
                self._grad_feats[tag, p] = chimod.grad_features(x1c, x2c, constants.hbar, p)
        self._J_affine = self._assemble_affine()

    # index helpers
    def _rows(self):
        g = self.grid
        return np.arange(self.n_rows).reshape(self.K, g.N1, g.N2)

    def _node(self, n1, n2):
        return np.asarray(n1) * (self.grid.N2 + 1) + np.asarray(n2)

    def _assemble_affine(self) -> np.ndarray:
        g, hbar = self.grid, self.constants.hbar
        K, N1, N2 = self.K, g.N1, g.N2
        J = np.zeros((self.n_rows, self.n_nodes, NPARAM), dtype=complex)
        rows = self._rows()
        wb1, wb2, wd1, wd2 = self.convention.weights(g)
        a = hbar / 1j
        X1, X2, R1, R2 = self.X1, self.X2, self.R1, self.R2
        ones1 = np.ones((1, N1, 1), dtype=int)
        ones2 = np.ones((1, 1, N2), dtype=int)
        n1c = np.arange(1, N1 + 1)[None, :, None] * ones2
        n2c = np.arange(1, N2 + 1)[None, None, :] * ones1

        def add(node_grid, feats):
            nodes = np.broadcast_to(node_grid, rows.shape)
            vals = np.broadcast_to(feats, rows.shape + (NPARAM,))
            np.add.at(J, (rows.ravel(), nodes.ravel()), vals.reshape(-1, NPARAM))

        vf = chimod.value_features
        # first boundary pair: nodes (N1, n2) and (0, n2)
        for n1_node, end, sign in ((N1, X1[:, -1], 1.0), (0, X1[:, 0], -1.0)):
            diff = vf(end[:, None, :], X2[:, 1:], hbar) - vf(end[:, None, :], R2[:, 1:], hbar)
            add(self._node(n1_node, n2c), sign * a * wb1 * diff[:, None, :, :])
        # second boundary pair: nodes (n1, N2) and (n1, 0)
        low = X2[:, -1] if self.literal else X2[:, 0]
        for n2_node, end, sign in ((N2, X2[:, -1], 1.0), (0, low, -1.0)):
            diff = vf(X1[:, 1:], end[:, None, :], hbar) - vf(R1[:, 1:], end[:, None, :], hbar)
            add(self._node(n1c, n2_node), sign * a * wb2 * diff[:, :, None, :])
        # time derivatives through the finite-difference stencils
        dphi = (vf(X1[:, 1:, None, :], X2[:, None, 1:, :], hbar)
                - vf(R1[:, 1:, None, :], R2[:, None, 1:, :], hbar))
        D1 = chimod.time_derivative_matrix(N1 + 1, g.epsilon)[1:]    # (N1, N1+1)
        D2 = chimod.time_derivative_matrix(N2 + 1, g.epsilon)[1:]
        for j in range(N1 + 1):
            w = D1[:, j]
            if np.any(w):
                add(self._node(j, n2c), -a * wd1 * w[None, :, None, None] * dphi)
        for j in range(N2 + 1):
            w = D2[:, j]
            if np.any(w):
                add(self._node(n1c, j), -a * wd2 * w[None, None, :, None] * dphi)
        # Laplacians are coordinate independent and cancel against the reference
        return J.reshape(self.n_rows, self.n_params)

    def coulomb_rows(self) -> np.ndarray:
        g, kern = self.grid, self.kernel
        if kern.e1e2 == 0.0:
            return np.zeros((self.K, g.N1, g.N2), dtype=complex)
        t1 = g.t1[1:, None]
        t2 = g.t2[None, 1:]
        full = coulomb_density(t1, t2, self.X1[:, 1:, None, :], self.X2[:, None, 1:, :], kern)
        ref = coulomb_density(t1, t2, self.R1[:, 1:, None, :], self.R2[:, None, 1:, :], kern)
        return (full - ref).astype(complex)

    def residual(self, coeffs: ChiCoefficients) -> np.ndarray:
        """Direct evaluation, independent of the assembled Jacobian."""
        return residual_cells(coeffs, self.X1, self.X2, self.kernel, self.constants,
                              self.convention, self.literal)

    def jacobian(self, coeffs: ChiCoefficients) -> np.ndarray:
        """``d residual / d packed coefficients``, shape ``(rows, params)`` complex."""
        g = self.grid
        eps, hbar = g.epsilon, self.constants.hbar
        K, N1, N2 = self.K, g.N1, g.N2
        C = _node_coeffs(coeffs)[1:, 1:]
        J = self._J_affine.copy().reshape(self.n_rows, self.n_nodes, NPARAM)
        rows = self._rows()
        n1c = np.arange(1, N1 + 1)
        n2c = np.arange(1, N2 + 1)
        for p, m in ((1, self.constants.m1), (2, self.constants.m2)):
            pref = -hbar ** 2 / (2 * m)
            for tag, sign in (("traj", 1.0), ("ref", -1.0)):
                F = self._grad_feats[tag, p]                       # (K, N1, N2, 3, P)
                grad = np.einsum("...kp,...p->...k", F, C)          # (K, N1, N2, 3)
                axis = 2 if p == 1 else 1
                cross = eps * np.sum(grad, axis=axis, keepdims=True)
                # d(grad) . cross: same node as the row
                direct = sign * pref * np.einsum("...k,...kp->...p", np.broadcast_to(cross, grad.shape), F)
                nodes = self._node(n1c[:, None], n2c[None, :])
                np.add.at(J, (rows.ravel(), np.broadcast_to(nodes, rows.shape).ravel()),
                          direct.reshape(-1, NPARAM))
                # grad . d(cross): every node along the summed axis
                if p == 1:
                    # row (k, a, b) couples to nodes (a, c) for all c
                    vals = sign * pref * eps * np.einsum("kabi,kacip->kabcp", grad, F)
                    node_idx = np.broadcast_to(self._node(n1c[:, None, None], n2c[None, None, :]),
                                               (N1, N2, N2))
                else:
                    # row (k, a, b) couples to nodes (c, b) for all c
                    vals = sign * pref * eps * np.einsum("kabi,kcbip->kabcp", grad, F)
                    node_idx = np.broadcast_to(self._node(n1c[None, None, :], n2c[None, :, None]),
                                               (N1, N2, N1))
                r = np.broadcast_to(rows[..., None], vals.shape[:-1])
                nd = np.broadcast_to(node_idx[None], vals.shape[:-1])
                np.add.at(J, (r.ravel(), nd.ravel()), vals.reshape(-1, NPARAM))
        return J.reshape(self.n_rows, self.n_params)


# --- explicit Hamiltonian on tiny grids -------------------------------------

MAX_HAMILTONIAN_DIM = 4096


def hamiltonian_matrix_tiny(grid: TimeGrid, spatial_points: int, kernel: KernelConfig,
                            constants: Constants, box: float = 1.0) -> np.ndarray:
    """Explicit discretized Hamiltonian with one spatial dimension per particle.

    Every vertex ``n = 1..N`` of each particle carries a coordinate on
    ``spatial_points`` equispaced points spanning ``[-box/2, box/2]``. The
    kinetic term of each vertex is ``-(hbar_tilde^2 / 2 m epsilon) d^2/dx^2``
    with Dirichlet second differences; the Coulomb sum is diagonal.
    """
    nv = grid.N1 + grid.N2
    dim = spatial_points ** nv
    if dim > MAX_HAMILTONIAN_DIM:
        raise DimensionTooLarge(f"dimension {dim} exceeds {MAX_HAMILTONIAN_DIM}")
    eps = grid.epsilon
    hbar_t = eps * constants.hbar
    x = np.linspace(-box / 2, box / 2, spatial_points)
    h = x[1] - x[0]
    lap = (np.diag(-2.0 * np.ones(spatial_points)) + np.diag(np.ones(spatial_points - 1), 1)
           + np.diag(np.ones(spatial_points - 1), -1)) / h ** 2
    eye = np.eye(spatial_points)
    masses = [constants.m1] * grid.N1 + [constants.m2] * grid.N2
    H = np.zeros((dim, dim))
    for v, m in enumerate(masses):
        term = np.array([[1.0]])
        for u in range(nv):
            term = np.kron(term, lap if u == v else eye)
        H -= hbar_t ** 2 / (2 * m * eps) * term
    if kernel.e1e2 != 0.0:
        coords = np.stack(np.meshgrid(*([x] * nv), indexing="ij"), axis=-1).reshape(dim, nv)
        diag = np.zeros(dim)
        for a in range(grid.N1):
            for b in range(grid.N2):
                s2 = ((a + 1) * eps - (b + 1) * eps) ** 2 - (coords[:, a] - coords[:, grid.N1 + b]) ** 2
                diag += eps ** 2 * regularized_delta(s2, kernel.sigma)
        H += kernel.coupling_prefactor * kernel.e1e2 * np.diag(diag)
    return H


def exchange_permutation(grid: TimeGrid, spatial_points: int) -> np.ndarray:
    """Permutation swapping the particle-1 and particle-2 vertex axes (needs ``N1 == N2``)."""
    if grid.N1 != grid.N2:
        raise ValueError("exchange requires N1 == N2")
    nv = grid.N1 + grid.N2
    idx = np.arange(spatial_points ** nv).reshape((spatial_points,) * nv)
    order = list(range(grid.N1, nv)) + list(range(grid.N1))
    perm = np.transpose(idx, order).ravel()
    return np.eye(idx.size)[perm]
