"""Observed convergence orders from refinement sequences."""
import numpy as np


def observed_order(steps, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(step)``."""
    h = np.log(np.asarray(steps, dtype=float))
    e = np.log(np.asarray(errors, dtype=float))
    slope, _ = np.polyfit(h, e, 1)
    return float(slope)


def pairwise_orders(steps, errors) -> list[float]:
    h = np.asarray(steps, dtype=float)
    e = np.asarray(errors, dtype=float)
    return [float(np.log(e[i] / e[i + 1]) / np.log(h[i] / h[i + 1])) for i in range(len(h) - 1)]
