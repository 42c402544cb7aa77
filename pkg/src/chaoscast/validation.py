"""Input validation helpers used by the estimators and chaos routines."""

import numpy as np

from .errors import DegeneracyError, LengthError, ShapeError


def as_series(x, min_length=1):
    """Coerce to a finite 1-d float array of at least ``min_length`` points."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        arr = np.squeeze(arr)
    if arr.ndim != 1:
        raise ShapeError(f"expected a 1-d series, got shape {np.shape(x)}")
    if arr.size < min_length:
        raise LengthError(f"series has {arr.size} points, need at least {min_length}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError("series contains non-finite values")
    return arr


def check_not_constant(x, what="series"):
    """Raise DegeneracyError if the series has zero variance."""
    arr = np.asarray(x, dtype=float)
    if arr.size == 0 or np.all(arr == arr.flat[0]):
        raise DegeneracyError(f"{what} is constant; operation is undefined")
    return arr


def as_matrix(X, y=None):
    """Coerce X (and optionally y) to finite float arrays with matching rows."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-d feature matrix, got ndim={X.ndim}")
    if not np.all(np.isfinite(X)):
        raise ShapeError("feature matrix contains non-finite values")
    if y is None:
        return X
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != X.shape[0]:
        raise ShapeError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if not np.all(np.isfinite(y)):
        raise ShapeError("target vector contains non-finite values")
    return X, y


def check_feature_count(X, expected):
    """Validate the column count of a feature matrix against a fitted model."""
    X = as_matrix(X)
    if X.shape[1] != expected:
        raise ShapeError(f"model was fitted with {expected} features, got {X.shape[1]}")
    return X
