"""Regression families and hyperparameter search for the nowcaster."""

from .linear import GLMRegressor, LassoRegressor, RidgeRegressor
from .search import (
    FAMILIES,
    MODEL_ORDER,
    REG_PARAMS,
    GridSearchResult,
    default_grid,
    grid_search,
    make_model,
)
from .serialize import (
    deserialize_model,
    model_from_json,
    model_to_json,
    serialize_model,
)
from .trees import GBTRegressor, RandomForestRegressor, TreeNode, tree_predict

__all__ = [
    "FAMILIES",
    "MODEL_ORDER",
    "REG_PARAMS",
    "GLMRegressor",
    "GBTRegressor",
    "GridSearchResult",
    "LassoRegressor",
    "RandomForestRegressor",
    "RidgeRegressor",
    "TreeNode",
    "default_grid",
    "deserialize_model",
    "grid_search",
    "make_model",
    "model_from_json",
    "model_to_json",
    "serialize_model",
    "tree_predict",
]
