"""Independent reference implementations used as test oracles."""

from __future__ import annotations

from fractions import Fraction

import numpy as np


def _sse(values: list[Fraction]) -> Fraction:
    if not values:
        return Fraction(0)
    mean = sum(values, Fraction(0)) / len(values)
    return sum(((v - mean) ** 2 for v in values), Fraction(0))


def best_root_split(X: np.ndarray, y: np.ndarray) -> tuple[int, Fraction] | None:
    """Exhaustive minimiser of post-split SSE over every feature and midpoint.

    Arithmetic is exact. Ties go to the lowest feature index, then the lowest
    threshold. Returns ``None`` when no split exists or every target is equal.
    """
    ys = [Fraction(float(v)) for v in y]
    if len(set(ys)) <= 1:
        return None
    best = None
    for j in range(X.shape[1]):
        col = [Fraction(float(v)) for v in X[:, j]]
        distinct = sorted(set(col))
        for a, b in zip(distinct, distinct[1:]):
            thr = (a + b) / 2
            left = [yv for xv, yv in zip(col, ys) if xv < thr]
            right = [yv for xv, yv in zip(col, ys) if xv >= thr]
            cost = _sse(left) + _sse(right)
            if best is None or cost < best[0]:
                best = (cost, j, thr)
    return None if best is None else (best[1], best[2])


def ols_pinv(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minimum-norm least squares with intercept via the pseudoinverse."""
    A = np.hstack([np.ones((X.shape[0], 1)), X])
    return np.linalg.pinv(A) @ y
