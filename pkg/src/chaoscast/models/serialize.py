"""Round-trip persistence for fitted models.

Models serialize to a plain dictionary (and JSON text) that names the
family, the constructor parameters, and the fitted state, so a saved
model can be inspected with standard tools and reloaded to produce
bit-identical predictions.
"""

import json

import numpy as np

from .linear import GLMRegressor, LassoRegressor, RidgeRegressor
from .search import FAMILIES
from .trees import GBTRegressor, RandomForestRegressor, TreeNode

_FAMILY_OF = {cls: name for name, cls in FAMILIES.items()}


def _node_to_dict(node):
    out = {"value": node.value, "n_samples": node.n_samples}
    if not node.is_leaf:
        out["feature"] = node.feature
        out["threshold"] = node.threshold
        out["left"] = _node_to_dict(node.left)
        out["right"] = _node_to_dict(node.right)
    return out


def _node_from_dict(data):
    node = TreeNode(value=data["value"], n_samples=data["n_samples"])
    if "feature" in data:
        node.feature = data["feature"]
        node.threshold = data["threshold"]
        node.left = _node_from_dict(data["left"])
        node.right = _node_from_dict(data["right"])
    return node


def serialize_model(model):
    """Describe a fitted model as a plain dictionary."""
    family = _FAMILY_OF.get(type(model))
    if family is None:
        raise ValueError(f"cannot serialize {type(model).__name__}")
    out = {
        "family": family,
        "params": model.get_params(),
        "n_features_in": int(model.n_features_in_),
        "train_mse": model.train_mse_,
    }
    if isinstance(model, (RidgeRegressor, LassoRegressor, GLMRegressor)):
        out["coef"] = [float(c) for c in model.coef_]
        out["intercept"] = model.intercept_
        if isinstance(model, LassoRegressor):
            out["converged"] = model.converged_
            out["n_sweeps"] = model.n_sweeps_
        if isinstance(model, GLMRegressor):
            out["n_iter"] = model.n_iter_
    elif isinstance(model, RandomForestRegressor):
        out["trees"] = [_node_to_dict(t) for t in model.trees_]
    elif isinstance(model, GBTRegressor):
        out["init"] = model.init_
        out["loss_path"] = model.loss_path_
        out["trees"] = [_node_to_dict(t) for t in model.trees_]
    return out


def deserialize_model(data):
    """Rebuild a fitted model from :func:`serialize_model` output."""
    family = data["family"]
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown model family {family!r}") from None
    model = cls(**data["params"])
    model.n_features_in_ = data["n_features_in"]
    model.train_mse_ = data["train_mse"]
    if issubclass(cls, (RidgeRegressor, LassoRegressor, GLMRegressor)):
        model.coef_ = np.asarray(data["coef"], dtype=float)
        model.intercept_ = data["intercept"]
        if cls is LassoRegressor:
            model.converged_ = data["converged"]
            model.n_sweeps_ = data["n_sweeps"]
        if cls is GLMRegressor:
            model.n_iter_ = data["n_iter"]
    elif cls is RandomForestRegressor:
        model.trees_ = [_node_from_dict(t) for t in data["trees"]]
    elif cls is GBTRegressor:
        model.init_ = data["init"]
        model.loss_path_ = list(data["loss_path"])
        model.trees_ = [_node_from_dict(t) for t in data["trees"]]
    return model


def model_to_json(model, indent=None):
    return json.dumps(serialize_model(model), sort_keys=True, indent=indent)


def model_from_json(text):
    return deserialize_model(json.loads(text))
