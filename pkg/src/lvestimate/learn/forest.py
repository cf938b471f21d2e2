"""Bagged regression trees: Random Forest and its q = p special case."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from lvestimate.learn import _kernels
from lvestimate.learn.tree import RegressionTree, _as_xy, fit_tree

Q_MODES = ("third", "all")


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    q_mode: str = "third"
    min_samples_split: int = 2
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.q_mode not in Q_MODES:
            raise ValueError(f"q_mode must be one of {Q_MODES}")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")

    def q_for(self, p: int) -> int:
        if self.q_mode == "all":
            return p
        return max(1, p // 3)


def tree_seed(master_seed: int, tree_index: int) -> int:
    """Seed of the random stream owned by one tree of an ensemble."""
    return int(np.random.SeedSequence([master_seed, tree_index]).generate_state(1)[0])


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple[RegressionTree, ...]
    config: ForestConfig
    n_features: int

    def tree_predictions(self, X) -> np.ndarray:
        """Per-tree predictions, shape ``(n_trees, n_rows)``."""
        X = _as_xy(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return np.stack([t.predict(X) for t in self.trees])

    def predict(self, X) -> np.ndarray:
        X = _as_xy(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        total = np.zeros(X.shape[0])
        for t in self.trees:
            total += t.predict(X)
        return total / len(self.trees)

    def identical_to(self, other: ForestModel) -> bool:
        return (
            self.config == other.config
            and len(self.trees) == len(other.trees)
            and all(a.identical_to(b) for a, b in zip(self.trees, other.trees))
        )

    def dump(self, path: str | Path) -> None:
        doc = {
            "config": {
                "n_trees": self.config.n_trees,
                "q_mode": self.config.q_mode,
                "min_samples_split": self.config.min_samples_split,
                "master_seed": self.config.master_seed,
            },
            "n_features": self.n_features,
            "trees": [t.to_dict() for t in self.trees],
        }
        Path(path).write_text(json.dumps(doc), encoding="utf-8")


def fit_forest(X, y, config: ForestConfig = ForestConfig(), jobs: int = 1) -> ForestModel:
    """Fit ``config.n_trees`` trees, each on its own bootstrap resample.

    Tree ``b`` draws its resample and its per-node feature subsets from the
    stream ``tree_seed(master_seed, b)``, so the result does not depend on
    ``jobs``.
    """
    X, y = _as_xy(X, y)
    p = X.shape[1]
    q = config.q_for(p)
    order = _kernels.presort(X)

    def grow(b: int) -> RegressionTree:
        return fit_tree(X, y, q=q, seed=tree_seed(config.master_seed, b),
                        min_samples_split=config.min_samples_split, bootstrap=True,
                        presorted=order)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trees = tuple(pool.map(grow, range(config.n_trees)))
    else:
        trees = tuple(grow(b) for b in range(config.n_trees))
    return ForestModel(trees, config, p)


def fit_brt(X, y, n_trees: int = 100, master_seed: int = 0, min_samples_split: int = 2,
            jobs: int = 1) -> ForestModel:
    """Bagging regression trees: every feature is a split candidate at every node."""
    cfg = ForestConfig(n_trees=n_trees, q_mode="all", min_samples_split=min_samples_split,
                       master_seed=master_seed)
    return fit_forest(X, y, cfg, jobs=jobs)


def predict_forest(model: ForestModel, X) -> np.ndarray:
    return model.predict(X)
