"""Least-squares collocation for the two-time wave equation.

The objective is ``F(c) = epsilon^2 * sum |W chi|^2`` over all collocation
trajectories and cells. It is minimized with Levenberg-damped Gauss-Newton;
a rejected damped step falls back to steepest descent with backtracking.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .action import (VALIDATED_CONVENTION, PrefactorConvention, ResidualOperator,
                     scalar_part_lambda)
from .chi import NPARAM, SLICES, ChiCoefficients
from .errors import Diverged, NonFinite
from .grid import Constants
from .kernel import KernelConfig

log = logging.getLogger(__name__)

ABSOLUTE_FLOOR = 1e-20
MAX_REJECTS = 50


@dataclass
class SolveReport:
    final_coeffs: ChiCoefficients
    residual_history: list = field(default_factory=list)
    lam: complex = 0j
    converged: bool = False
    iterations: int = 0
    damping_history: list = field(default_factory=list)

    @property
    def final_objective(self) -> float:
        return self.residual_history[-1]

    @property
    def relative_residual(self) -> float:
        F0 = self.residual_history[0]
        return self.final_objective / F0 if F0 > 0 else 0.0

    def to_dict(self) -> dict:
        c = self.final_coeffs
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "residual_history": [float(v) for v in self.residual_history],
            "lambda": [self.lam.real, self.lam.imag],
            "cross_block_norm": c.block_norm("s11", "r11"),
        }


class CollocationObjective:
    """Objective, real-stacked residual and Jacobian for one collocation set."""

    def __init__(self, op: ResidualOperator):
        self.op = op
        self.eps = op.grid.epsilon

    def residual_vector(self, coeffs) -> np.ndarray:
        R = self.op.residual(coeffs).ravel()
        if not np.all(np.isfinite(R)):
            raise NonFinite("residual contains NaN or Inf")
        return self.eps * np.concatenate([R.real, R.imag])

    def value(self, coeffs) -> float:
        r = self.residual_vector(coeffs)
        return float(r @ r)

    def jacobian(self, coeffs) -> np.ndarray:
        J = self.op.jacobian(coeffs)
        return self.eps * np.concatenate([J.real, J.imag])

    def gradient(self, coeffs) -> np.ndarray:
        """``dF/dc = 2 J^T r``."""
        return 2.0 * self.jacobian(coeffs).T @ self.residual_vector(coeffs)


class _DampedSystem:
    """Gauss-Newton normal matrix in whichever of the primal or dual form is smaller."""

    def __init__(self, J: np.ndarray, r: np.ndarray):
        self.J = J
        self.r = r
        self.dual = J.shape[0] < J.shape[1]
        self.A = J @ J.T if self.dual else J.T @ J
        self.rhs = r if self.dual else J.T @ r
        # keeps A + mu*I numerically positive definite
        self.mu_min = 1e-14 * max(float(np.trace(self.A)) / self.A.shape[0], 1e-300)

    def step(self, mu: float) -> np.ndarray:
        A = self.A + max(mu, self.mu_min) * np.eye(self.A.shape[0])
        y = linalg.cho_solve(linalg.cho_factor(A, check_finite=False), self.rhs, check_finite=False)
        return -(self.J.T @ y) if self.dual else -y


def gauge_mask(grid) -> np.ndarray:
    """Packed-parameter mask of the corner cross blocks removed from the ansatz.

    At node ``(0, 0)`` chi never enters the residual or the wave functional;
    at ``(N1, N2)`` both coordinates are pinned to their end points, so the
    cross term is not separately observable from the lower blocks.
    """
    mask = np.zeros(grid.node_shape + (NPARAM,), dtype=bool)
    for name in ("s11", "r11"):
        mask[0, 0, SLICES[name]] = True
        mask[-1, -1, SLICES[name]] = True
    return mask.reshape(-1)


def solve(initial: ChiCoefficients, trajs, kernel: KernelConfig, constants: Constants,
          convention: PrefactorConvention = VALIDATED_CONVENTION, tol: float = 1e-10,
          max_iter: int = 50, damping: float = 1e-3, literal_zero_endpoint: bool = False,
          gauge_fix: bool = True) -> SolveReport:
    """Drive the collocation residual to zero starting from ``initial``.

    Converged means ``F <= tol * F0`` or ``F <= 1e-20``. Damping is multiplied
    by 2 on a rejected step and divided by 3 on an accepted one. With
    ``gauge_fix`` the corner cross blocks (see ``gauge_mask``) are zeroed and
    held fixed.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if len(trajs) < 4:
        raise ValueError("at least 4 collocation trajectories are required")
    if not np.all(np.isfinite(initial.to_vector())):
        raise NonFinite("initial coefficients are not finite")
    grid = initial.grid
    op = ResidualOperator(grid, trajs, kernel, constants, convention, literal_zero_endpoint)
    obj = CollocationObjective(op)

    c = initial.to_vector()
    active = np.ones(c.size, dtype=bool)
    if gauge_fix:
        fixed = gauge_mask(grid)
        c = np.where(fixed, 0.0, c)
        active = ~fixed
    coeffs = ChiCoefficients.from_vector(grid, c)
    r = obj.residual_vector(coeffs)
    F = float(r @ r)
    F0 = F
    history = [F]
    mus = [damping]
    mu = damping
    rejects = 0
    it = 0

    def done(F):
        return F <= ABSOLUTE_FLOOR or F <= tol * F0

    while not done(F) and it < max_iter:
        it += 1
        system = _DampedSystem(obj.jacobian(coeffs)[:, active], r)
        accepted = False
        while not accepted:
            delta = np.zeros_like(c)
            try:
                delta[active] = system.step(mu)
            except linalg.LinAlgError:
                F_new = np.inf
            else:
                trial = ChiCoefficients.from_vector(grid, c + delta)
                r_new = obj.residual_vector(trial)
                F_new = float(r_new @ r_new)
            if F_new < F:
                accepted = True
                mu /= 3.0
                break
            mu *= 2.0
            rejects += 1
            # steepest-descent fallback with backtracking
            grad = np.zeros_like(c)
            grad[active] = 2.0 * system.J.T @ r
            gnorm2 = float(grad @ grad)
            t = 1.0 / max(np.sqrt(gnorm2), 1e-300)
            for _ in range(30):
                trial = ChiCoefficients.from_vector(grid, c - t * grad)
                r_new = obj.residual_vector(trial)
                F_new = float(r_new @ r_new)
                if F_new <= F - 1e-4 * t * gnorm2:
                    accepted = True
                    break
                t *= 0.5
            if accepted:
                break
            if rejects >= MAX_REJECTS:
                raise Diverged(f"{rejects} consecutive rejected steps at F={F:.3e}")
        rejects = 0
        c = trial.to_vector()
        coeffs, r, F = trial, r_new, F_new
        history.append(F)
        mus.append(mu)
        log.debug("iteration %d: F=%.3e mu=%.1e", it, F, mu)

    lam = scalar_part_lambda(coeffs, grid, kernel, constants, convention)
    return SolveReport(coeffs, history, lam, done(F), it, mus)


def gradient_check(coeffs: ChiCoefficients, trajs, kernel: KernelConfig, constants: Constants,
                   convention: PrefactorConvention = VALIDATED_CONVENTION, n_dirs: int = 20,
                   step: float = 1e-5, seed: int = 0) -> dict:
    """Compare ``grad F . v`` with central differences along random unit directions."""
    op = ResidualOperator(coeffs.grid, trajs, kernel, constants, convention)
    obj = CollocationObjective(op)
    grad = obj.gradient(coeffs)
    c = coeffs.to_vector()
    rng = np.random.default_rng(seed)
    devs = []
    for _ in range(n_dirs):
        v = rng.normal(size=c.size)
        v /= np.linalg.norm(v)
        fp = obj.value(ChiCoefficients.from_vector(coeffs.grid, c + step * v))
        fm = obj.value(ChiCoefficients.from_vector(coeffs.grid, c - step * v))
        fd = (fp - fm) / (2 * step)
        an = float(grad @ v)
        scale = max(abs(fd), abs(an))
        devs.append(abs(fd - an) / scale if scale > 0 else 0.0)
    return {"max_relative_deviation": max(devs), "gradient_norm": float(np.linalg.norm(grad)),
            "directions": n_dirs}
