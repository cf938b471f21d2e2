from lvestimate.learn.forest import (
    ForestConfig,
    ForestModel,
    fit_brt,
    fit_forest,
    predict_forest,
    tree_seed,
)
from lvestimate.learn.linear import LinearModel, fit_ols, predict_ols
from lvestimate.learn.tree import RegressionTree, fit_tree, predict_tree

__all__ = [
    "ForestConfig",
    "ForestModel",
    "LinearModel",
    "RegressionTree",
    "fit_brt",
    "fit_forest",
    "fit_ols",
    "fit_tree",
    "predict_forest",
    "predict_ols",
    "predict_tree",
    "tree_seed",
]
