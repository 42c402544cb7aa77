"""Regression trees and the two ensembles built on them.

The random forest grows trees on exact (sorted) split search over
bootstrap resamples with per-split feature subsampling; gradient-boosted
trees grow on quantile-binned features against the running residual.
Split quality is the usual variance-reduction surrogate: maximizing
S_L^2/n_L + S_R^2/n_R over candidate cut points, where S is the sum of
targets on each side.  A sample goes left iff feature <= threshold, and
thresholds are stored on the original feature scale so prediction never
depends on the binning.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from ..errors import LengthError
from ..validation import as_matrix, check_feature_count


@dataclass
class TreeNode:
    value: float
    n_samples: int
    feature: Optional[int] = None
    threshold: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self):
        return self.feature is None

    def depth(self):
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def n_leaves(self):
        if self.is_leaf:
            return 1
        return self.left.n_leaves() + self.right.n_leaves()


def tree_predict(node, X):
    """Evaluate one tree on a 2-d feature matrix."""
    X = np.asarray(X, dtype=float)
    out = np.empty(X.shape[0])
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        cur, ids = stack.pop()
        if ids.size == 0:
            continue
        if cur.is_leaf:
            out[ids] = cur.value
        else:
            go_left = X[ids, cur.feature] <= cur.threshold
            stack.append((cur.left, ids[go_left]))
            stack.append((cur.right, ids[~go_left]))
    return out


def _best_split_exact(X, y, idx, features, min_leaf):
    """Best (score, feature, threshold) over sorted candidate cuts.

    Cut position k puts sorted samples 0..k left and requires a strict
    value increase at k, so the threshold xs_sorted[k] partitions by <=
    exactly; float midpoints are never formed.  Returns None when no cut
    leaves min_leaf samples on both sides.
    """
    n = idx.size
    total = float(y[idx].sum())
    best = None
    for f in features:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs_sorted = xs[order]
        csum = np.cumsum(y[idx[order]])
        n_left = np.arange(1, n)
        valid = (xs_sorted[:-1] < xs_sorted[1:]) \
            & (n_left >= min_leaf) & ((n - n_left) >= min_leaf)
        if not valid.any():
            continue
        s_left = csum[:-1]
        s_right = total - s_left
        score = np.where(
            valid,
            s_left ** 2 / n_left + s_right ** 2 / (n - n_left),
            -np.inf,
        )
        k = int(np.argmax(score))
        if best is None or score[k] > best[0]:
            best = (float(score[k]), int(f), float(xs_sorted[k]))
    return best


def _grow_exact(X, y, idx, depth, max_depth, min_leaf, max_features, rng):
    n = idx.size
    node = TreeNode(value=float(y[idx].mean()), n_samples=n)
    if depth >= max_depth or n < 2 * min_leaf:
        return node
    y_node = y[idx]
    if np.all(y_node == y_node[0]):
        return node
    p = X.shape[1]
    if max_features < p:
        features = np.sort(rng.choice(p, size=max_features, replace=False))
    else:
        features = np.arange(p)
    found = _best_split_exact(X, y, idx, features, min_leaf)
    if found is None:
        return node
    _, node.feature, node.threshold = found
    go_left = X[idx, node.feature] <= node.threshold
    node.left = _grow_exact(X, y, idx[go_left], depth + 1,
                            max_depth, min_leaf, max_features, rng)
    node.right = _grow_exact(X, y, idx[~go_left], depth + 1,
                             max_depth, min_leaf, max_features, rng)
    return node


class RandomForestRegressor(BaseEstimator, RegressorMixin):
    """Bagged regression trees with per-split feature subsampling.

    Each tree sees a bootstrap resample of size n and considers
    ceil(p / 3) features (at least one) at every split, the usual
    regression-forest convention.  The prediction is the arithmetic mean
    of the per-tree predictions, exposed via :meth:`predict_per_tree` so
    the averaging itself is checkable.  Results are bit-reproducible for
    a fixed seed.
    """

    def __init__(self, num_trees=10, max_depth=5, min_instances_per_node=1,
                 bootstrap=True, seed=0):
        self.num_trees = num_trees
        self.max_depth = max_depth
        self.min_instances_per_node = min_instances_per_node
        self.bootstrap = bootstrap
        self.seed = seed

    def fit(self, X, y):
        if self.num_trees < 1:
            raise ValueError("num_trees must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_instances_per_node < 1:
            raise ValueError("min_instances_per_node must be >= 1")
        X, y = as_matrix(X, y)
        n, p = X.shape
        if n == 0:
            raise LengthError("cannot fit on an empty matrix")
        self.n_features_in_ = p
        max_features = max(1, math.ceil(p / 3))
        self.trees_ = []
        for child in np.random.SeedSequence(self.seed).spawn(self.num_trees):
            rng = np.random.default_rng(child)
            if self.bootstrap:
                idx = rng.integers(0, n, size=n)
            else:
                idx = np.arange(n)
            self.trees_.append(
                _grow_exact(X, y, idx, 0, self.max_depth,
                            self.min_instances_per_node, max_features, rng)
            )
        self.train_mse_ = float(np.mean((y - self.predict(X)) ** 2))
        return self

    def predict_per_tree(self, X):
        """Stack of per-tree predictions, shape (num_trees, n_rows)."""
        X = check_feature_count(X, self.n_features_in_)
        return np.vstack([tree_predict(t, X) for t in self.trees_])

    def predict(self, X):
        return self.predict_per_tree(X).mean(axis=0)


def _bin_features(X, max_bins):
    """Per-feature quantile bin edges and integer codes.

    When a feature has at most max_bins distinct values the distinct
    values themselves (minus the largest) become edges, so splits can
    separate every value exactly.  code c means the value lies in
    (edges[c-1], edges[c]]; splitting at code c sends x <= edges[c] left.
    """
    n, p = X.shape
    edges = []
    codes = np.empty((n, p), dtype=np.int64)
    for j in range(p):
        col = X[:, j]
        distinct = np.unique(col)
        if distinct.size <= max_bins:
            e = distinct[:-1]
        else:
            qs = np.quantile(col, np.linspace(0.0, 1.0, max_bins + 1)[1:-1])
            e = np.unique(qs)
        edges.append(e)
        codes[:, j] = np.searchsorted(e, col, side="left")
    return edges, codes


def _best_split_binned(codes, edges, resid, idx, min_leaf):
    n = idx.size
    total = float(resid[idx].sum())
    best = None
    for f in range(codes.shape[1]):
        e = edges[f]
        if e.size == 0:
            continue
        counts = np.bincount(codes[idx, f], minlength=e.size + 1)
        sums = np.bincount(codes[idx, f], weights=resid[idx],
                           minlength=e.size + 1)
        n_left = np.cumsum(counts)[:-1]
        s_left = np.cumsum(sums)[:-1]
        valid = (n_left >= min_leaf) & ((n - n_left) >= min_leaf)
        if not valid.any():
            continue
        s_right = total - s_left
        with np.errstate(divide="ignore", invalid="ignore"):
            score = np.where(
                valid,
                s_left ** 2 / n_left + s_right ** 2 / (n - n_left),
                -np.inf,
            )
        k = int(np.argmax(score))
        if best is None or score[k] > best[0]:
            best = (float(score[k]), f, k, float(e[k]))
    return best


def _grow_binned(codes, edges, resid, idx, depth, max_depth, min_leaf,
                 train_pred):
    n = idx.size
    node = TreeNode(value=float(resid[idx].mean()), n_samples=n)
    stop = (
        depth >= max_depth
        or n < 2 * min_leaf
        or np.all(resid[idx] == resid[idx][0])
    )
    found = None if stop else _best_split_binned(codes, edges, resid, idx,
                                                 min_leaf)
    if found is None:
        train_pred[idx] = node.value
        return node
    _, node.feature, code, node.threshold = found
    go_left = codes[idx, node.feature] <= code
    node.left = _grow_binned(codes, edges, resid, idx[go_left], depth + 1,
                             max_depth, min_leaf, train_pred)
    node.right = _grow_binned(codes, edges, resid, idx[~go_left], depth + 1,
                              max_depth, min_leaf, train_pred)
    return node


class GBTRegressor(BaseEstimator, RegressorMixin):
    """Gradient-boosted regression trees with squared-error loss.

    The model starts from the target mean and adds ``num_trees``
    depth-bounded trees, each fitted to the current residuals on
    quantile-binned features and applied with the ``learning_rate``
    shrinkage.  With exact leaf means every stage is a projection, so the
    recorded ``loss_path_`` of training MSE values never increases for
    learning rates in (0, 2].  The fit is deterministic; ``seed`` is
    accepted for interface parity with the forest and is unused.
    """

    def __init__(self, num_trees=20, max_depth=3, max_bins=32,
                 min_instances_per_node=1, learning_rate=0.1, seed=0):
        self.num_trees = num_trees
        self.max_depth = max_depth
        self.max_bins = max_bins
        self.min_instances_per_node = min_instances_per_node
        self.learning_rate = learning_rate
        self.seed = seed

    def fit(self, X, y):
        if self.num_trees < 1:
            raise ValueError("num_trees must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.max_bins < 2:
            raise ValueError("max_bins must be >= 2")
        if self.min_instances_per_node < 1:
            raise ValueError("min_instances_per_node must be >= 1")
        if not 0.0 < self.learning_rate <= 2.0:
            raise ValueError("learning_rate must be in (0, 2]")
        X, y = as_matrix(X, y)
        n = X.shape[0]
        if n == 0:
            raise LengthError("cannot fit on an empty matrix")
        self.n_features_in_ = X.shape[1]
        edges, codes = _bin_features(X, self.max_bins)
        self.init_ = float(y.mean())
        pred = np.full(n, self.init_)
        self.trees_ = []
        self.loss_path_ = [float(np.mean((y - pred) ** 2))]
        stage_pred = np.empty(n)
        for _ in range(self.num_trees):
            resid = y - pred
            tree = _grow_binned(codes, edges, resid, np.arange(n), 0,
                                self.max_depth, self.min_instances_per_node,
                                stage_pred)
            self.trees_.append(tree)
            pred = pred + self.learning_rate * stage_pred
            self.loss_path_.append(float(np.mean((y - pred) ** 2)))
        self.train_mse_ = self.loss_path_[-1]
        return self

    def staged_predict(self, X):
        """Predictions after each stage, shape (num_trees + 1, n_rows)."""
        X = check_feature_count(X, self.n_features_in_)
        out = [np.full(X.shape[0], self.init_)]
        for tree in self.trees_:
            out.append(out[-1] + self.learning_rate * tree_predict(tree, X))
        return np.vstack(out)

    def predict(self, X):
        return self.staged_predict(X)[-1]
