"""Quadratic ansatz for the per-cell wave-function exponent.

At every node ``(n1, n2)`` of the two-time grid the exponent is

    chi = (i/hbar) * s(x1, x2) + r(x1, x2)

with ``s`` and ``r`` polynomials of total degree two in the particle
coordinates (the ``r`` blocks already hold the product ``epsilon * r``).
Coefficients live on the ``(N1+1) x (N2+1)`` vertex grid so that the
boundary times ``t = 0`` and ``t = T`` are represented; time derivatives
are backward differences over that grid.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Callable

import numpy as np

from .errors import GridMismatch, OutOfGrid, Overflow
from .grid import Constants, TimeGrid, Trajectory

SYM_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
_SYM_MULT = np.array([1.0 if k == l else 2.0 for k, l in SYM_PAIRS])

# (name, flat size); order fixes the packed 56-vector layout
BLOCKS = (
    ("s00", 1), ("r00", 1),
    ("s10", 3), ("s01", 3), ("r10", 3), ("r01", 3),
    ("s20", 6), ("s02", 6), ("r20", 6), ("r02", 6),
    ("s11", 9), ("r11", 9),
)
SLICES = {}
_o = 0
for _name, _n in BLOCKS:
    SLICES[_name] = slice(_o, _o + _n)
    _o += _n
NPARAM = _o
S_BLOCKS = tuple(n for n, _ in BLOCKS if n[0] == "s")
R_BLOCKS = tuple(n for n, _ in BLOCKS if n[0] == "r")
CROSS_BLOCKS = ("s11", "r11")
_TAIL_SHAPE = {1: (), 3: (3,), 6: (3, 3), 9: (3, 3)}


def column_names() -> list[str]:
    names = []
    for name, n in BLOCKS:
        if n == 1:
            names.append(name)
        elif n == 3:
            names += [f"{name}_{k}" for k in range(3)]
        elif n == 6:
            names += [f"{name}_{k}{l}" for k, l in SYM_PAIRS]
        else:
            names += [f"{name}_{k}{l}" for k in range(3) for l in range(3)]
    return names


def _pack_sym(A):
    return np.stack([A[..., k, l] for k, l in SYM_PAIRS], axis=-1)


def _unpack_sym(v):
    A = np.empty(v.shape[:-1] + (3, 3))
    for i, (k, l) in enumerate(SYM_PAIRS):
        A[..., k, l] = v[..., i]
        A[..., l, k] = v[..., i]
    return A


@dataclass(frozen=True, eq=False)
class ChiCoefficients:
    """Coefficient blocks on the vertex grid.

    Scalars have shape ``(N1+1, N2+1)``, vectors ``(..., 3)``, matrices
    ``(..., 3, 3)``. ``s20, s02, r20, r02`` are symmetric by construction.
    """

    grid: TimeGrid
    s00: np.ndarray
    r00: np.ndarray
    s10: np.ndarray
    s01: np.ndarray
    r10: np.ndarray
    r01: np.ndarray
    s20: np.ndarray
    s02: np.ndarray
    r20: np.ndarray
    r02: np.ndarray
    s11: np.ndarray
    r11: np.ndarray

    def __post_init__(self):
        shape = self.grid.node_shape
        for name, n in BLOCKS:
            arr = np.array(getattr(self, name), dtype=float)
            arr = np.broadcast_to(arr, shape + _TAIL_SHAPE[n]).copy()
            if n == 6:
                # symmetrize once so the invariant holds exactly
                arr = _unpack_sym(_pack_sym(arr))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def zeros(cls, grid: TimeGrid) -> "ChiCoefficients":
        return cls(grid, **{name: 0.0 for name, _ in BLOCKS})

    @classmethod
    def from_vector(cls, grid: TimeGrid, vec) -> "ChiCoefficients":
        v = np.asarray(vec, dtype=float).reshape(grid.node_shape + (NPARAM,))
        blocks = {}
        for name, n in BLOCKS:
            part = v[..., SLICES[name]]
            if n == 1:
                blocks[name] = part[..., 0]
            elif n == 3:
                blocks[name] = part
            elif n == 6:
                blocks[name] = _unpack_sym(part)
            else:
                blocks[name] = part.reshape(part.shape[:-1] + (3, 3))
        return cls(grid, **blocks)

    @classmethod
    def from_function(cls, grid: TimeGrid, fn: Callable) -> "ChiCoefficients":
        """Sample ``fn(t1, t2) -> dict of blocks`` on the vertex grid.

        ``t1, t2`` are broadcast arrays of shape ``(N1+1, N2+1)``; missing
        blocks default to zero.
        """
        t1, t2 = np.meshgrid(grid.t1, grid.t2, indexing="ij")
        blocks = {name: 0.0 for name, _ in BLOCKS}
        blocks.update(fn(t1, t2))
        return cls(grid, **blocks)

    def to_vector(self) -> np.ndarray:
        parts = []
        for name, n in BLOCKS:
            arr = getattr(self, name)
            if n == 1:
                parts.append(arr[..., None])
            elif n == 6:
                parts.append(_pack_sym(arr))
            else:
                parts.append(arr.reshape(arr.shape[: 2] + (n,)))
        return np.concatenate(parts, axis=-1).reshape(-1)

    def to_table(self) -> np.ndarray:
        """Rows ``(n1, n2, packed coefficients...)`` in C order of nodes."""
        N1, N2 = self.grid.node_shape
        n1, n2 = np.meshgrid(np.arange(N1), np.arange(N2), indexing="ij")
        body = self.to_vector().reshape(N1 * N2, NPARAM)
        return np.column_stack([n1.ravel(), n2.ravel(), body])

    def replace(self, **blocks) -> "ChiCoefficients":
        return replace(self, **blocks)

    def __add__(self, other: "ChiCoefficients") -> "ChiCoefficients":
        _same_grid(self.grid, other.grid)
        return ChiCoefficients.from_vector(self.grid, self.to_vector() + other.to_vector())

    def scaled(self, factor: float) -> "ChiCoefficients":
        return ChiCoefficients.from_vector(self.grid, factor * self.to_vector())

    def block_norm(self, *names) -> float:
        """Max-abs over the named blocks."""
        return max(float(np.max(np.abs(getattr(self, n)))) for n in names)

    def swapped(self) -> "ChiCoefficients":
        """Relabel the particles: transpose the node grid and swap 1 <-> 2 blocks."""
        def t(a):
            return np.swapaxes(a, 0, 1)
        return ChiCoefficients(
            self.grid.swapped(),
            s00=t(self.s00), r00=t(self.r00),
            s10=t(self.s01), s01=t(self.s10), r10=t(self.r01), r01=t(self.r10),
            s20=t(self.s02), s02=t(self.s20), r20=t(self.r02), r02=t(self.r20),
            s11=np.swapaxes(t(self.s11), -1, -2), r11=np.swapaxes(t(self.r11), -1, -2),
        )


def _same_grid(a: TimeGrid, b: TimeGrid):
    if a != b:
        raise GridMismatch(f"coefficient grids differ: {a} vs {b}")


# --- feature maps: chi = features(x1, x2) @ packed coefficients ------------

def block_weights(hbar: float) -> np.ndarray:
    """Complex weight of each packed parameter: ``i/hbar`` for s, 1 for r."""
    w = np.ones(NPARAM, dtype=complex)
    for name in S_BLOCKS:
        w[SLICES[name]] = 1j / hbar
    return w


def _monomials(x1, x2):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    x1, x2 = np.broadcast_arrays(x1, x2)
    out = np.zeros(x1.shape[:-1] + (NPARAM,))
    out[..., SLICES["s00"]] = 1.0
    out[..., SLICES["r00"]] = 1.0
    for a, x in (("10", x1), ("01", x2)):
        out[..., SLICES["s" + a]] = x
        out[..., SLICES["r" + a]] = x
    for a, x in (("20", x1), ("02", x2)):
        quad = np.stack([x[..., k] * x[..., l] for k, l in SYM_PAIRS], axis=-1) * _SYM_MULT
        out[..., SLICES["s" + a]] = quad
        out[..., SLICES["r" + a]] = quad
    cross = (x1[..., :, None] * x2[..., None, :]).reshape(x1.shape[:-1] + (9,))
    out[..., SLICES["s11"]] = cross
    out[..., SLICES["r11"]] = cross
    return out


def _grad_monomials(x1, x2, particle: int):
    """d(monomials)/dx_particle, shape ``(..., 3, NPARAM)``."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    x1, x2 = np.broadcast_arrays(x1, x2)
    lead = x1.shape[:-1]
    out = np.zeros(lead + (3, NPARAM))
    own, other = (x1, x2) if particle == 1 else (x2, x1)
    lin, sq = ("10", "20") if particle == 1 else ("01", "02")
    eye = np.eye(3)
    for pre in "sr":
        out[..., SLICES[pre + lin]] = eye
        sl = SLICES[pre + sq]
        for i, (k, l) in enumerate(SYM_PAIRS):
            if k == l:
                out[..., k, sl.start + i] = 2.0 * own[..., k]
            else:
                out[..., k, sl.start + i] = 2.0 * own[..., l]
                out[..., l, sl.start + i] = 2.0 * own[..., k]
        sl = SLICES[pre + "11"]
        for k in range(3):
            for l in range(3):
                if particle == 1:
                    out[..., k, sl.start + 3 * k + l] = other[..., l]
                else:
                    out[..., l, sl.start + 3 * k + l] = other[..., k]
    return out


def _lap_monomials(particle: int) -> np.ndarray:
    out = np.zeros(NPARAM)
    sq = "20" if particle == 1 else "02"
    for pre in "sr":
        sl = SLICES[pre + sq]
        for i, (k, l) in enumerate(SYM_PAIRS):
            if k == l:
                out[sl.start + i] = 2.0
    return out


def value_features(x1, x2, hbar: float) -> np.ndarray:
    return _monomials(x1, x2) * block_weights(hbar)


def grad_features(x1, x2, hbar: float, particle: int) -> np.ndarray:
    return _grad_monomials(x1, x2, particle) * block_weights(hbar)


def lap_features(hbar: float, particle: int) -> np.ndarray:
    return _lap_monomials(particle) * block_weights(hbar)


def time_derivative_matrix(n_nodes: int, epsilon: float) -> np.ndarray:
    """Finite-difference d/dt on ``n_nodes`` equispaced vertices.

    Backward differences ``(chi_n - chi_{n-1}) / epsilon`` for ``n >= 1``,
    matching the slice-by-slice telescoping of the canonical term; forward
    difference at ``n = 0``.
    """
    D = np.zeros((n_nodes, n_nodes))
    idx = np.arange(1, n_nodes)
    D[idx, idx] = 1.0 / epsilon
    D[idx, idx - 1] = -1.0 / epsilon
    D[0, 0], D[0, 1] = -1.0 / epsilon, 1.0 / epsilon
    return D


def time_derivatives(coeffs: ChiCoefficients) -> tuple[np.ndarray, np.ndarray]:
    """Packed coefficient fields ``d/dt1`` and ``d/dt2``, shape ``(N1+1, N2+1, NPARAM)``."""
    g = coeffs.grid
    v = coeffs.to_vector().reshape(g.node_shape + (NPARAM,))
    D1 = time_derivative_matrix(g.N1 + 1, g.epsilon)
    D2 = time_derivative_matrix(g.N2 + 1, g.epsilon)
    return np.einsum("ij,jkp->ikp", D1, v), np.einsum("kj,ijp->ikp", D2, v)


@dataclass(frozen=True)
class ChiValue:
    value: complex
    grad_x1: np.ndarray
    grad_x2: np.ndarray
    lap_x1: complex
    lap_x2: complex
    dt1: complex
    dt2: complex


def eval_chi(coeffs: ChiCoefficients, cell, x1, x2, constants: Constants) -> ChiValue:
    """Exponent and its derivatives at vertex ``cell = (n1, n2)``."""
    n1, n2 = cell
    N1, N2 = coeffs.grid.node_shape
    if not (0 <= n1 < N1 and 0 <= n2 < N2):
        raise OutOfGrid(f"cell {cell} outside grid with {N1}x{N2} vertices")
    hbar = constants.hbar
    c = coeffs.to_vector().reshape(coeffs.grid.node_shape + (NPARAM,))
    d1, d2 = time_derivatives(coeffs)
    phi = value_features(x1, x2, hbar)
    return ChiValue(
        value=complex(phi @ c[n1, n2]),
        grad_x1=grad_features(x1, x2, hbar, 1) @ c[n1, n2],
        grad_x2=grad_features(x1, x2, hbar, 2) @ c[n1, n2],
        lap_x1=complex(lap_features(hbar, 1) @ c[n1, n2]),
        lap_x2=complex(lap_features(hbar, 2) @ c[n1, n2]),
        dt1=complex(phi @ d1[n1, n2]),
        dt2=complex(phi @ d2[n1, n2]),
    )


def chi_on_nodes(coeffs: ChiCoefficients, x1, x2, constants: Constants,
                 n1=slice(None), n2=slice(None)) -> np.ndarray:
    """Vectorized chi at nodes ``[n1, n2]`` with coordinates broadcast to match."""
    c = coeffs.to_vector().reshape(coeffs.grid.node_shape + (NPARAM,))[n1, n2]
    phi = value_features(x1, x2, constants.hbar)
    return np.sum(phi * c, axis=-1)


def free_particle_chi(grid: TimeGrid, p1, p2, constants: Constants) -> ChiCoefficients:
    """Additive plane-wave exponent of two non-interacting particles.

    ``chi = -(i/hbar)[(W1 t1 - p1.x1)/T2 + (W2 t2 - p2.x2)/T1]`` with
    ``W = p^2 / 2m``.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    W1 = p1 @ p1 / (2.0 * constants.m1)
    W2 = p2 @ p2 / (2.0 * constants.m2)

    def blocks(t1, t2):
        return {
            "s00": -(W1 * t1 / grid.T2 + W2 * t2 / grid.T1),
            "s10": p1 / grid.T2,
            "s01": p2 / grid.T1,
        }

    return ChiCoefficients.from_function(grid, blocks)


def free_particle_energy(p1, p2, constants: Constants) -> float:
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    return float(p1 @ p1 / (2 * constants.m1) + p2 @ p2 / (2 * constants.m2))


def log_wavefunctional(coeffs: ChiCoefficients, traj: Trajectory, constants: Constants) -> complex:
    """``sum_{n1,n2 >= 1} epsilon * chi`` on the broken line."""
    g = coeffs.grid
    traj.check(g)
    chi = chi_on_nodes(coeffs, traj.x1[1:, None, :], traj.x2[None, 1:, :], constants,
                       slice(1, None), slice(1, None))
    return complex(g.epsilon * np.sum(chi))


def reconstruct_wavefunctional(coeffs: ChiCoefficients, traj: Trajectory,
                               constants: Constants, max_log_modulus: float = 700.0) -> complex:
    log_psi = log_wavefunctional(coeffs, traj, constants)
    if log_psi.real > max_log_modulus:
        raise Overflow(f"log|Psi| = {log_psi.real:.1f} exceeds {max_log_modulus}")
    return complex(np.exp(log_psi))


def integral_sums(coeffs: ChiCoefficients, traj: Trajectory) -> tuple[float, float]:
    """Riemann sums ``(S, R)`` of the phase and amplitude densities.

    Evaluated independently of the complex feature map: the stored ``r``
    blocks are ``epsilon * r``, so ``R = sum epsilon * (epsilon r)``.
    """
    g = coeffs.grid
    eps = g.epsilon
    S = R = 0.0
    for n1 in range(1, g.N1 + 1):
        for n2 in range(1, g.N2 + 1):
            x1, x2 = traj.x1[n1], traj.x2[n2]
            for pre in "sr":
                b = {k: getattr(coeffs, pre + k)[n1, n2] for k in ("00", "10", "01", "20", "02", "11")}
                val = (b["00"] + b["10"] @ x1 + b["01"] @ x2 + x1 @ b["20"] @ x1
                       + x1 @ b["11"] @ x2 + x2 @ b["02"] @ x2)
                if pre == "s":
                    S += eps * eps * val
                else:
                    R += eps * val
    return S, R


def split_s_r(coeffs: ChiCoefficients) -> tuple[ChiCoefficients, ChiCoefficients]:
    """Phase-only and amplitude-only copies of ``coeffs``."""
    zero = ChiCoefficients.zeros(coeffs.grid)
    s_part = zero.replace(**{n: getattr(coeffs, n) for n in S_BLOCKS})
    r_part = zero.replace(**{n: getattr(coeffs, n) for n in R_BLOCKS})
    return s_part, r_part


def recombine(s_part: ChiCoefficients, r_part: ChiCoefficients) -> ChiCoefficients:
    _same_grid(s_part.grid, r_part.grid)
    blocks = {n: getattr(s_part, n) for n in S_BLOCKS}
    blocks.update({n: getattr(r_part, n) for n in R_BLOCKS})
    return s_part.replace(**blocks)


def save_coefficients(path, coeffs: ChiCoefficients, header: str = "") -> None:
    """Columnar text: ``n1 n2`` then every packed coefficient column."""
    names = ["n1", "n2"] + column_names()
    g = coeffs.grid
    meta = f"grid T1={g.T1!r} T2={g.T2!r} N1={g.N1} N2={g.N2} epsilon={g.epsilon!r}"
    lines = [header, meta] if header else [meta]
    lines.append("\t".join(names))
    fmt = ["%d", "%d"] + ["%.17g"] * NPARAM
    np.savetxt(path, coeffs.to_table(), fmt=fmt, delimiter="\t", header="\n".join(lines))


def load_coefficients(path) -> ChiCoefficients:
    with open(path) as fh:
        meta = next(line for line in fh if line.startswith("# grid "))
    kv = dict(item.split("=") for item in meta[len("# grid "):].split())
    grid = TimeGrid(float(kv["T1"]), float(kv["T2"]), int(kv["N1"]), int(kv["N2"]), float(kv["epsilon"]))
    table = np.loadtxt(path, delimiter="\t", ndmin=2)
    return ChiCoefficients.from_vector(grid, table[:, 2:])
