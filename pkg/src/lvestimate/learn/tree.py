from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from lvestimate.learn import _kernels


def _as_xy(X, y=None):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    if y is None:
        return X
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.shape != (X.shape[0],):
        raise ValueError("y must have one target per row of X")
    if X.shape[0] == 0:
        raise ValueError("empty training sample")
    return X, y


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """A fitted CART regression tree stored as flat node arrays.

    Node 0 is the root. Internal nodes route a row left when
    ``x[feature] < threshold`` and right otherwise; leaves have
    ``feature == -1`` and predict ``value``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == _kernels.LEAF))

    def predict(self, X) -> np.ndarray:
        X = _as_xy(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return _kernels.descend(self.feature, self.threshold, self.left, self.right, self.value, X)

    def identical_to(self, other: RegressionTree) -> bool:
        return self.n_features == other.n_features and all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ("feature", "threshold", "left", "right", "value")
        )

    def to_dict(self, node: int = 0) -> dict[str, Any]:
        """Nested JSON-ready dump of the subtree rooted at ``node``."""
        if self.feature[node] == _kernels.LEAF:
            return {"type": "leaf", "prediction": float(self.value[node])}
        return {
            "type": "split",
            "feature_index": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "left": self.to_dict(int(self.left[node])),
            "right": self.to_dict(int(self.right[node])),
        }


def fit_tree(X, y, q: int | None = None, seed: int = 0, min_samples_split: int = 2,
             bootstrap: bool = False, presorted: np.ndarray | None = None) -> RegressionTree:
    """Grow a regression tree to full depth with MSE splits.

    At every node ``q`` features are tried in a random order drawn from
    ``seed``; features constant within the node are skipped and do not count
    towards ``q``. Candidate thresholds are midpoints between consecutive
    distinct values. The split with the largest variance reduction wins;
    gains within a relative 1e-12 of each other are ties, resolved towards
    the lowest feature index and then the lowest threshold.

    With ``bootstrap=True`` the tree is grown on ``n`` rows drawn with
    replacement from the same random stream. ``presorted`` may carry a
    cached ``_kernels.presort(X)`` when many trees share one ``X``.
    """
    X, y = _as_xy(X, y)
    p = X.shape[1]
    q = p if q is None else int(q)
    if not 1 <= q <= p:
        raise ValueError(f"q must be in [1, {p}], got {q}")
    if min_samples_split < 2:
        raise ValueError("min_samples_split must be >= 2")
    order = _kernels.presort(X) if presorted is None else presorted
    arrays = _kernels.grow_tree(X, y, order, bootstrap, q, min_samples_split, np.uint32(seed))
    return RegressionTree(*arrays, n_features=p)


def predict_tree(tree: RegressionTree, X) -> np.ndarray:
    return tree.predict(X)
