"""Input validation helpers used by the game objects and the estimators."""
from __future__ import annotations

import numpy as np

from .exceptions import DimensionError

TOL_FEAS = 1e-9
NE_EPS = 1e-6


def check_finite_array(values, name="array") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_strategy(x, size: int | None = None, tol: float = TOL_FEAS, name="strategy") -> np.ndarray:
    """Validate a probability vector and return it as a float array.

    Components may undershoot zero and the sum may miss one by at most `tol`;
    nothing is renormalized here.
    """
    arr = np.asarray(x, dtype=np.float64).ravel()
    if size is not None and arr.shape[0] != size:
        raise DimensionError(f"{name} has {arr.shape[0]} entries, expected {size}")
    if arr.size == 0:
        raise DimensionError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if arr.min() < -tol:
        raise ValueError(f"{name} has negative component {arr.min():.3g}")
    if abs(arr.sum() - 1.0) > tol:
        raise ValueError(f"{name} sums to {arr.sum():.12g}, not 1")
    return arr


def normalize_strategy(x, tol: float = TOL_FEAS) -> np.ndarray:
    """Clip components above ``-tol`` to zero and rescale onto the simplex."""
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.min() < -tol:
        raise ValueError(f"strategy has negative component {arr.min():.3g}")
    arr = np.clip(arr, 0.0, None)
    total = arr.sum()
    if total <= 0:
        raise ValueError("strategy has no positive mass")
    return arr / total


def check_action_counts(m, n: int | None = None) -> tuple[int, ...]:
    counts = tuple(int(k) for k in m)
    if n is not None and len(counts) != n:
        raise DimensionError(f"got {len(counts)} action counts for {n} agents")
    if any(k < 1 for k in counts):
        raise ValueError(f"action counts must be >= 1, got {counts}")
    return counts


def check_agent_index(i: int, n: int, name="agent") -> int:
    i = int(i)
    if not 0 <= i < n:
        raise IndexError(f"{name} index {i} out of range for {n} agents")
    return i
