"""System energy from the large-T behaviour of the exponent's time derivatives."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .chi import ChiCoefficients, value_features, time_derivatives
from .errors import EndpointDependent
from .grid import Constants


@dataclass
class EnergyEstimate:
    W: float
    endpoint_spread: float
    T_sequence: list
    fit_residual: float
    slope: float = 0.0
    W_of_T: list = field(default_factory=list)
    spread_of_T: list = field(default_factory=list)

    def table(self) -> np.ndarray:
        """Rows ``(T, W(T), endpoint spread at T)``."""
        return np.column_stack([self.T_sequence, self.W_of_T, self.spread_of_T])

    def save(self, path, header: str = "") -> None:
        lines = ([header] if header else []) + [
            f"W_inf {self.W!r} slope {self.slope!r} fit_residual {self.fit_residual!r}",
            "T\tW_T\tendpoint_spread"]
        np.savetxt(path, self.table(), fmt="%.17g", delimiter="\t", header="\n".join(lines))


def energy_at_corner(coeffs: ChiCoefficients, x1T, x2T, constants: Constants) -> complex:
    """``i hbar (T2 d chi/dt1 + T1 d chi/dt2)`` at ``(T1, T2, x1^T, x2^T)``.

    Each time derivative is weighted by the duration of the opposite axis:
    the exponent of one particle is spread over the other particle's time
    slices, and only their sum is the ordinary phase.
    """
    g = coeffs.grid
    d1, d2 = time_derivatives(coeffs)
    phi = value_features(np.asarray(x1T, float), np.asarray(x2T, float), constants.hbar)
    dchi = g.T2 * (phi @ d1[-1, -1]) + g.T1 * (phi @ d2[-1, -1])
    return complex(1j * constants.hbar * dchi)


def estimate_energy(solve_at: Callable[[float], ChiCoefficients], T_sequence: Sequence[float],
                    endpoints_sample: Sequence, constants: Constants,
                    max_spread_fraction: float = 0.01) -> EnergyEstimate:
    """Extrapolate the corner energy to ``T -> infinity``.

    ``solve_at(T)`` returns coefficients on a grid with ``T1 = T2 = T``;
    ``endpoints_sample`` holds ``(x1^T, x2^T)`` pairs. ``W(T)`` (the real part,
    averaged over end points) is fitted as ``W_inf + a/T``.
    """
    T_seq = [float(T) for T in T_sequence]
    if len(T_seq) < 3 or np.any(np.diff(T_seq) <= 0):
        raise ValueError("T_sequence must be strictly increasing with at least 3 entries")
    W_T, spread_T = [], []
    for T in T_seq:
        coeffs = solve_at(T)
        g = coeffs.grid
        if not (np.isclose(g.T1, T) and np.isclose(g.T2, T)):
            raise ValueError(f"solve_at({T}) returned a grid with T1={g.T1}, T2={g.T2}")
        vals = np.array([energy_at_corner(coeffs, x1, x2, constants).real
                         for x1, x2 in endpoints_sample])
        W_T.append(float(vals.mean()))
        spread_T.append(float(vals.max() - vals.min()))
    A = np.column_stack([np.ones(len(T_seq)), 1.0 / np.asarray(T_seq)])
    (W_inf, slope), *_ = np.linalg.lstsq(A, np.asarray(W_T), rcond=None)
    fit_res = float(np.max(np.abs(A @ [W_inf, slope] - W_T)))
    est = EnergyEstimate(float(W_inf), max(spread_T), T_seq, fit_res, float(slope), W_T, spread_T)
    if est.endpoint_spread > max_spread_fraction * abs(est.W):
        raise EndpointDependent(est.endpoint_spread, est.W, max_spread_fraction)
    return est
