"""Hyperparameter selection on a time-ordered holdout.

The default per-family grids are deliberately small: nowcasting retunes
often, so each candidate must fit in well under a second.  Candidates
are enumerated in a canonical ascending order and ties in validation MSE
keep the earlier candidate, which makes selection deterministic and
biases toward the simpler model.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import LengthError
from .linear import GLMRegressor, LassoRegressor, RidgeRegressor
from .trees import GBTRegressor, RandomForestRegressor

REG_PARAMS = (0.01, 0.02, 0.03, 0.04, 0.05, 0.1, 0.2, 0.3, 0.4)

FAMILIES = {
    "lasso": LassoRegressor,
    "ridge": RidgeRegressor,
    "glm": GLMRegressor,
    "random_forest": RandomForestRegressor,
    "gbt": GBTRegressor,
}

# Canonical reporting order for model families; comparison tables pair
# each family with every earlier one in this order.
MODEL_ORDER = ("lasso", "ridge", "random_forest", "gbt", "glm")

_SEEDED = ("random_forest", "gbt")


def default_grid(family):
    """Candidate parameter dicts for one family, in canonical order."""
    if family in ("lasso", "ridge", "glm"):
        return [{"reg_param": v} for v in REG_PARAMS]
    if family == "random_forest":
        return [
            {"max_depth": d, "num_trees": t, "min_instances_per_node": m}
            for d in (1, 2, 3)
            for t in (2, 3, 4)
            for m in (1, 2)
        ]
    if family == "gbt":
        return [
            {"max_depth": d, "max_bins": b, "min_instances_per_node": m}
            for d in (1, 2, 3, 4)
            for b in (4, 8, 16)
            for m in (1, 2)
        ]
    raise ValueError(f"unknown model family {family!r}")


def make_model(family, params=None, seed=None):
    """Instantiate one family with the given parameters.

    ``seed`` is only forwarded to the tree families; the linear solvers
    are deterministic by construction.
    """
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown model family {family!r}") from None
    kwargs = dict(params or {})
    if seed is not None and family in _SEEDED:
        kwargs.setdefault("seed", seed)
    return cls(**kwargs)


@dataclass
class GridSearchResult:
    family: str
    model: object
    params: dict
    validation_mse: float
    n_candidates: int
    trace: list = field(default_factory=list)


def grid_search(family, X, y, grid=None, split_fraction=0.2, seed=None,
                keep_trace=False):
    """Pick the best candidate on a trailing holdout and refit on all rows.

    Rows are assumed time-ordered; the last ``split_fraction`` of them
    (at least one row) form the validation slice and are never shuffled.
    The winning parameters are refitted on the full matrix, so the
    returned model's ``train_mse_`` reflects every row while
    ``validation_mse`` reflects out-of-sample error at selection time.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if n < 10:
        raise LengthError(f"grid search needs at least 10 rows, got {n}")
    if not 0.0 < split_fraction < 1.0:
        raise ValueError("split_fraction must be in (0, 1)")
    if grid is None:
        grid = default_grid(family)
    if not grid:
        raise ValueError("empty parameter grid")
    n_val = max(1, int(round(n * split_fraction)))
    n_train = n - n_val
    if n_train < 1:
        raise LengthError("split leaves no training rows")
    X_train, y_train = X[:n_train], y[:n_train]
    X_val, y_val = X[n_train:], y[n_train:]
    best_mse = np.inf
    best_params = None
    trace = []
    for params in grid:
        model = make_model(family, params, seed)
        model.fit(X_train, y_train)
        mse = float(np.mean((y_val - model.predict(X_val)) ** 2))
        if keep_trace:
            trace.append((dict(params), mse))
        if mse < best_mse:
            best_mse = mse
            best_params = params
    final = make_model(family, best_params, seed)
    final.fit(X, y)
    return GridSearchResult(
        family=family,
        model=final,
        params=dict(best_params),
        validation_mse=best_mse,
        n_candidates=len(grid),
        trace=trace,
    )
