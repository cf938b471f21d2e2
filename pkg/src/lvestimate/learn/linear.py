from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from lvestimate.learn.tree import _as_xy


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Affine predictor; ``coefficients[0]`` is the intercept."""

    coefficients: np.ndarray

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])

    @property
    def slopes(self) -> np.ndarray:
        return self.coefficients[1:]

    def predict(self, X) -> np.ndarray:
        X = _as_xy(X)
        if X.shape[1] != self.slopes.size:
            raise ValueError(f"expected {self.slopes.size} features, got {X.shape[1]}")
        return self.intercept + X @ self.slopes


def design_matrix(X) -> np.ndarray:
    X = _as_xy(X)
    return np.hstack([np.ones((X.shape[0], 1)), X])


def fit_ols(X, y) -> LinearModel:
    """Ordinary least squares with intercept.

    Rank-deficient designs (constant columns, fewer rows than columns) get
    the minimum-norm solution from a complete orthogonal factorisation
    instead of an error, so sparse training sets extrapolate rather than
    fail.
    """
    X, y = _as_xy(X, y)
    coef, *_ = scipy.linalg.lstsq(design_matrix(X), y, lapack_driver="gelsy")
    return LinearModel(coef)


def predict_ols(model: LinearModel, X) -> np.ndarray:
    return model.predict(X)
