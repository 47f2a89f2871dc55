"""Two-time slicing of the trajectory space.

Both time axes ``[0, T1]`` and ``[0, T2]`` are cut into slices of one common
length ``epsilon``; trajectories are broken lines with a vertex at every slice
boundary, the first and last vertex of each particle being fixed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, NonCommensurate, NonPositive

_COMMENSURATE_RTOL = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    T1: float
    T2: float
    N1: int
    N2: int
    epsilon: float

    def __post_init__(self):
        if self.N1 < 1 or self.N2 < 1:
            raise NonPositive(f"slice counts must be >= 1, got {self.N1}, {self.N2}")
        if self.T1 <= 0 or self.T2 <= 0 or self.epsilon <= 0:
            raise NonPositive("durations and epsilon must be positive")

    @property
    def t1(self) -> np.ndarray:
        """Vertex times ``n1 * epsilon`` for ``n1 = 0..N1``."""
        return np.arange(self.N1 + 1) * self.epsilon

    @property
    def t2(self) -> np.ndarray:
        return np.arange(self.N2 + 1) * self.epsilon

    @property
    def node_shape(self) -> tuple[int, int]:
        return (self.N1 + 1, self.N2 + 1)

    def refine(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.T1, self.T2, self.N1 * factor, self.N2 * factor,
                        self.epsilon / factor)

    def swapped(self) -> "TimeGrid":
        return TimeGrid(self.T2, self.T1, self.N2, self.N1, self.epsilon)


def make_grid(T1: float, T2: float, epsilon: float) -> TimeGrid:
    """Build a grid with ``N = T / epsilon`` slices on each axis.

    Raises NonPositive for non-positive inputs and NonCommensurate when either
    duration is not an integer multiple of ``epsilon`` (relative 1e-9).
    """
    if T1 <= 0 or T2 <= 0 or epsilon <= 0:
        raise NonPositive(f"T1={T1}, T2={T2}, epsilon={epsilon} must all be positive")
    counts = []
    for T in (T1, T2):
        ratio = T / epsilon
        n = int(round(ratio))
        if n < 1 or abs(ratio - n) > _COMMENSURATE_RTOL * max(1.0, ratio):
            raise NonCommensurate(f"T={T} is not an integer multiple of epsilon={epsilon}")
        counts.append(n)
    return TimeGrid(float(T1), float(T2), counts[0], counts[1], float(epsilon))


@dataclass(frozen=True)
class Constants:
    hbar: float = 1.0
    hbar_tilde: float = 1.0
    m1: float = 1.0
    m2: float = 1.0
    e1e2: float = 0.0

    def __post_init__(self):
        if self.m1 <= 0 or self.m2 <= 0:
            raise NonPositive(f"masses must be positive, got {self.m1}, {self.m2}")

    def swapped(self) -> "Constants":
        return Constants(self.hbar, self.hbar_tilde, self.m2, self.m1, self.e1e2)


def bind_constants(grid: TimeGrid, hbar: float = 1.0, m1: float = 1.0,
                   m2: float = 1.0, e1e2: float = 0.0) -> Constants:
    """Constants tied to ``grid``: the functional Planck constant is ``epsilon * hbar``."""
    return Constants(hbar=hbar, hbar_tilde=grid.epsilon * hbar, m1=m1, m2=m2, e1e2=e1e2)


@dataclass(frozen=True)
class Trajectory:
    """Broken-line vertices of both particles; ``x1[0]``, ``x1[-1]``,
    ``x2[0]`` and ``x2[-1]`` are the fixed end points."""

    x1: np.ndarray
    x2: np.ndarray

    def __post_init__(self):
        x1 = np.array(self.x1, dtype=float)
        x2 = np.array(self.x2, dtype=float)
        if x1.ndim != 2 or x1.shape[1] != 3 or x2.ndim != 2 or x2.shape[1] != 3:
            raise ValueError("trajectory vertices must have shape (N+1, 3)")
        x1.setflags(write=False)
        x2.setflags(write=False)
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)

    @property
    def endpoints(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(x1^0, x1^T1, x2^0, x2^T2)``."""
        return self.x1[0], self.x1[-1], self.x2[0], self.x2[-1]

    def check(self, grid: TimeGrid) -> None:
        if self.x1.shape[0] != grid.N1 + 1 or self.x2.shape[0] != grid.N2 + 1:
            raise GridMismatch(
                f"trajectory has {self.x1.shape[0]}/{self.x2.shape[0]} vertices, "
                f"grid needs {grid.N1 + 1}/{grid.N2 + 1}")

    def with_interior(self, x1_interior, x2_interior) -> "Trajectory":
        """Copy with interior vertices replaced; end points are kept."""
        x1 = self.x1.copy()
        x2 = self.x2.copy()
        x1[1:-1] = x1_interior
        x2[1:-1] = x2_interior
        return Trajectory(x1, x2)

    def reference(self) -> "Trajectory":
        """Same end points, all interior vertices at the origin."""
        return self.with_interior(0.0, 0.0)

    def swapped(self) -> "Trajectory":
        return Trajectory(self.x2, self.x1)


def straight_line(grid: TimeGrid, x1_start, x1_end, x2_start, x2_end) -> Trajectory:
    s1 = (grid.t1 / grid.T1)[:, None]
    s2 = (grid.t2 / grid.T2)[:, None]
    x1 = (1 - s1) * np.asarray(x1_start, float) + s1 * np.asarray(x1_end, float)
    x2 = (1 - s2) * np.asarray(x2_start, float) + s2 * np.asarray(x2_end, float)
    # exact end points, independent of rounding in the interpolation
    x1[0], x1[-1] = x1_start, x1_end
    x2[0], x2[-1] = x2_start, x2_end
    return Trajectory(x1, x2)


def _smooth_random_path(rng, n, start, end, amplitude, noise):
    # cubic in s that vanishes at both ends, on top of the straight line
    s = np.linspace(0.0, 1.0, n + 1)[:, None]
    a, b = rng.uniform(-1, 1, size=(2, 3))
    bump = amplitude * (a * s * (1 - s) + b * s * (1 - s) * (2 * s - 1))
    jitter = noise * rng.uniform(-1, 1, size=(n + 1, 3))
    path = (1 - s) * start + s * end + bump + jitter
    path[0], path[-1] = start, end
    return path


def sample_collocation(grid: TimeGrid, endpoints, count: int, seed: int = 0,
                       amplitude: float = 0.5, noise: float = 0.1) -> list[Trajectory]:
    """Draw ``count`` reproducible collocation trajectories.

    Each particle path is the straight line between its end points plus a
    cubic bump ``s(1-s)(a + b(2s-1))`` with ``a, b ~ U(-1, 1)^3`` scaled by
    ``amplitude``, plus independent ``U(-noise, noise)`` jitter on the
    interior vertices. ``endpoints`` is ``(x1^0, x1^T1, x2^0, x2^T2)``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    x10, x1T, x20, x2T = (np.asarray(e, dtype=float) for e in endpoints)
    rng = np.random.default_rng(seed)
    trajs = []
    for _ in range(count):
        x1 = _smooth_random_path(rng, grid.N1, x10, x1T, amplitude, noise)
        x2 = _smooth_random_path(rng, grid.N2, x20, x2T, amplitude, noise)
        trajs.append(Trajectory(x1, x2))
    return trajs


def random_endpoints(n_sets: int, seed: int = 0, scale: float = 0.5) -> list:
    """``n_sets`` end-point quadruples drawn from ``U(-scale, scale)^3``."""
    rng = np.random.default_rng(seed)
    return [tuple(rng.uniform(-scale, scale, size=(4, 3))) for _ in range(n_sets)]


def sample_collocation_sets(grid: TimeGrid, endpoint_sets, count: int, seed: int = 0,
                            amplitude: float = 0.5, noise: float = 0.1) -> list[Trajectory]:
    """``count`` trajectories for each end-point quadruple, concatenated."""
    trajs = []
    for i, ends in enumerate(endpoint_sets):
        trajs += sample_collocation(grid, ends, count, seed=seed + i,
                                    amplitude=amplitude, noise=noise)
    return trajs
