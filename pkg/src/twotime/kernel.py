"""Light-cone interaction kernel.

The Coulomb term couples the two world lines through ``delta(s^2)`` of the
Minkowski interval (``c = 1``). The delta is replaced by a normalized
Gaussian in ``s^2`` of variance ``sigma``; the sharp limit is reached by
evaluating on a decreasing ``sigma`` sequence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import NonPositiveSeparation, NonPositiveSigma, QuadratureFailure
from .grid import TimeGrid, Trajectory

ALLOWED_PREFACTORS = (0.5, 1.0)


@dataclass(frozen=True)
class KernelConfig:
    sigma: float = 1e-2
    coupling_prefactor: float = 0.5
    e1e2: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise NonPositiveSigma(f"sigma must be positive, got {self.sigma}")
        if self.coupling_prefactor not in ALLOWED_PREFACTORS:
            raise ValueError(f"coupling_prefactor must be one of {ALLOWED_PREFACTORS}")


def interval_squared(t1, t2, x1, x2):
    """``(t1 - t2)^2 - |x1 - x2|^2``; broadcasts over leading axes."""
    dx = np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float)
    return (np.asarray(t1) - np.asarray(t2)) ** 2 - np.sum(dx * dx, axis=-1)


def regularized_delta(s2, sigma: float):
    if not sigma > 0:
        raise NonPositiveSigma(f"sigma must be positive, got {sigma}")
    s2 = np.asarray(s2, dtype=float)
    out = np.exp(-(s2 * s2) / (2.0 * sigma)) / math.sqrt(2.0 * math.pi * sigma)
    return out if out.ndim else float(out)


def light_cone_roots(t1: float, r: float, T2: float) -> list[float]:
    """Times ``t2 = t1 -/+ r`` lying inside ``[0, T2]``."""
    return [t for t in (t1 - r, t1 + r) if 0.0 <= t <= T2]


def sharp_time_integral(t1: float, r: float, T2: float) -> float:
    """Sigma -> 0 value: each interior root contributes ``1 / |d s^2/dt2| = 1/(2r)``."""
    if r <= 0:
        raise NonPositiveSeparation("separation must be positive")
    return sum(1.0 / abs(2.0 * (t2 - t1)) for t2 in light_cone_roots(t1, r, T2))


def coulomb_time_integral(t1: float, r: float, T2: float, config: KernelConfig,
                          epsabs: float = 1e-10, windows: float = 40.0) -> float:
    """Integrate the regularized kernel over ``t2 in [0, T2]`` at fixed separation ``r``.

    The Gaussian is only ``sqrt(sigma)/(2r)`` wide in ``t2`` around each
    light-cone root, so the interval is cut at ``root -/+ windows * width``
    and each piece is integrated separately.
    """
    if r <= 0:
        raise NonPositiveSeparation(f"separation must be positive, got {r}")
    sigma = config.sigma
    width = math.sqrt(sigma) / (2.0 * r)
    cuts = {0.0, float(T2), min(max(t1, 0.0), T2)}
    for root in (t1 - r, t1 + r):
        for c in (root - windows * width, root, root + windows * width):
            if 0.0 < c < T2:
                cuts.add(float(c))
    cuts = sorted(cuts)

    def f(t2):
        s2 = (t1 - t2) ** 2 - r * r
        return math.exp(-(s2 * s2) / (2.0 * sigma)) / math.sqrt(2.0 * math.pi * sigma)

    total, err = 0.0, 0.0
    budget = epsabs / max(len(cuts) - 1, 1)
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        val, e = integrate.quad(f, a, b, epsabs=budget, epsrel=0.0, limit=400)
        total += val
        err += e
    if err > epsabs:
        raise QuadratureFailure(f"error estimate {err:.2e} above {epsabs:.1e}")
    return total


def coulomb_density(t1, t2, x1, x2, config: KernelConfig):
    """Coupled kernel value ``prefactor * e1e2 * delta_sigma(s^2)``."""
    s2 = interval_squared(t1, t2, x1, x2)
    return config.coupling_prefactor * config.e1e2 * regularized_delta(s2, config.sigma)


def coulomb_action_term(traj: Trajectory, grid: TimeGrid, config: KernelConfig) -> float:
    """Double Riemann sum of the coupled kernel over vertices ``n1, n2 >= 1``."""
    traj.check(grid)
    if config.e1e2 == 0.0:
        return 0.0
    t1 = grid.t1[1:, None]
    t2 = grid.t2[None, 1:]
    dens = coulomb_density(t1, t2, traj.x1[1:, None, :], traj.x2[None, 1:, :], config)
    return float(grid.epsilon ** 2 * np.sum(dens))


def sigma_sequence(start: float = 1e-2, stop: float = 1e-6, ratio: float = 10.0) -> list[float]:
    n = int(round(math.log(start / stop) / math.log(ratio)))
    return [start / ratio ** k for k in range(n + 1)]


def sigma_sweep(t1: float, r: float, T2: float, sigmas, coupling_prefactor: float = 0.5):
    """Values of ``coulomb_time_integral`` along ``sigmas`` with their sharp limit."""
    limit = sharp_time_integral(t1, r, T2)
    rows = []
    for s in sigmas:
        v = coulomb_time_integral(t1, r, T2, KernelConfig(sigma=s, coupling_prefactor=coupling_prefactor))
        rows.append((s, v, abs(v - limit)))
    return limit, rows
