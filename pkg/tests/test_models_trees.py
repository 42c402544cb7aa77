"""Tree families: forest averaging, GBT stagewise loss, reproducibility."""

import numpy as np
import pytest

from chaoscast import GBTRegressor, LengthError, RandomForestRegressor
from chaoscast.models import tree_predict


def min_leaf_size(node):
    if node.is_leaf:
        return node.n_samples
    return min(min_leaf_size(node.left), min_leaf_size(node.right))


def regression_fixture(seed, n=100, p=6):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = X @ rng.standard_normal(p) + 0.1 * rng.standard_normal(n)
    return X, y


class TestRandomForest:
    def test_prediction_is_mean_of_trees(self):
        X, y = regression_fixture(99)
        rf = RandomForestRegressor(num_trees=12, max_depth=4, seed=5).fit(X, y)
        per_tree = rf.predict_per_tree(X)
        assert per_tree.shape == (12, len(X))
        np.testing.assert_array_equal(per_tree.mean(axis=0), rf.predict(X))

    def test_deep_tree_memorizes_distinct_rows(self):
        rng = np.random.default_rng(99)
        X = rng.standard_normal((40, 3))
        y = rng.standard_normal(40)
        deep = RandomForestRegressor(num_trees=1, max_depth=64,
                                     bootstrap=False, seed=0).fit(X, y)
        assert deep.train_mse_ == 0.0
        np.testing.assert_array_equal(deep.predict(X), y)

    def test_bit_reproducible_under_fixed_seed(self):
        X, y = regression_fixture(99)
        Xt = np.random.default_rng(1).standard_normal((30, 6))
        a = RandomForestRegressor(num_trees=8, max_depth=5, seed=42).fit(X, y)
        b = RandomForestRegressor(num_trees=8, max_depth=5, seed=42).fit(X, y)
        c = RandomForestRegressor(num_trees=8, max_depth=5, seed=43).fit(X, y)
        np.testing.assert_array_equal(a.predict(Xt), b.predict(Xt))
        assert not np.array_equal(a.predict(Xt), c.predict(Xt))

    def test_stump_has_at_most_two_leaves(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((40, 3))
        y = rng.standard_normal(40)
        stump = RandomForestRegressor(num_trees=1, max_depth=1,
                                      bootstrap=False).fit(X, y)
        tree = stump.trees_[0]
        assert tree.depth() == 1
        assert tree.n_leaves() == 2

    def test_min_instances_per_node_honored(self):
        X, y = regression_fixture(99)
        rf = RandomForestRegressor(num_trees=6, max_depth=8,
                                   min_instances_per_node=5, seed=3).fit(X, y)
        assert min(min_leaf_size(t) for t in rf.trees_) >= 5

    def test_constant_target_predicts_constant(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((20, 3))
        y = np.full(20, 7.5)
        rf = RandomForestRegressor(num_trees=3, seed=1).fit(X, y)
        assert rf.train_mse_ == 0.0
        np.testing.assert_array_equal(rf.predict(X), y)

    def test_tree_predict_routing_matches_threshold_rule(self):
        # A split keeps x <= threshold on the left; exercise both sides
        # plus the exact boundary value.
        X = np.array([[1.0], [2.0], [3.0], [4.0]])
        y = np.array([0.0, 0.0, 10.0, 10.0])
        rf = RandomForestRegressor(num_trees=1, max_depth=1,
                                   bootstrap=False).fit(X, y)
        tree = rf.trees_[0]
        assert tree.threshold == 2.0
        got = tree_predict(tree, np.array([[1.5], [2.0], [2.5]]))
        np.testing.assert_array_equal(got, [0.0, 0.0, 10.0])

    def test_parameter_validation(self):
        X, y = regression_fixture(0, n=20)
        with pytest.raises(ValueError):
            RandomForestRegressor(num_trees=0).fit(X, y)
        with pytest.raises(ValueError):
            RandomForestRegressor(max_depth=0).fit(X, y)
        with pytest.raises(ValueError):
            RandomForestRegressor(min_instances_per_node=0).fit(X, y)

    def test_empty_training_set_rejected(self):
        with pytest.raises(LengthError):
            RandomForestRegressor().fit(np.empty((0, 2)), np.empty(0))


class TestGBT:
    def test_stagewise_loss_non_increasing_on_ten_fixtures(self):
        for f in range(10):
            rng = np.random.default_rng(1000 + f)
            X = rng.standard_normal((120, 4))
            y = np.sin(X[:, 0]) + 0.5 * X[:, 1] ** 2 \
                + 0.2 * rng.standard_normal(120)
            model = GBTRegressor(num_trees=50, max_depth=3,
                                 max_bins=16).fit(X, y)
            # stage 0 is the mean-only model, then one entry per tree
            path = np.array(model.loss_path_)
            assert path.shape == (51,)
            # independent route: recompute each stage's mse from the
            # staged predictions
            staged = model.staged_predict(X)
            recomputed = np.mean((y[None, :] - staged) ** 2, axis=1)
            np.testing.assert_allclose(path, recomputed, rtol=0, atol=1e-12)
            assert np.all(np.diff(path) <= 1e-12)

    def test_deterministic_refits(self):
        X, y = regression_fixture(99)
        Xt = np.random.default_rng(2).standard_normal((30, 6))
        a = GBTRegressor(num_trees=10).fit(X, y)
        b = GBTRegressor(num_trees=10).fit(X, y)
        np.testing.assert_array_equal(a.predict(Xt), b.predict(Xt))

    def test_exact_fit_on_few_distinct_values(self):
        # 16 distinct feature values fit inside 32 bins, so with unit
        # learning rate boosting can drive the training error to zero.
        X = np.arange(16.0).reshape(-1, 1)
        y = np.array([1.0, 5.0, 2.0, 8.0] * 4)
        model = GBTRegressor(num_trees=30, max_depth=4, max_bins=32,
                             learning_rate=1.0).fit(X, y)
        assert model.train_mse_ == pytest.approx(0.0, abs=1e-20)

    def test_zero_variance_target(self):
        rng = np.random.default_rng(99)
        X = rng.standard_normal((20, 3))
        y = np.full(20, 7.5)
        model = GBTRegressor(num_trees=5).fit(X, y)
        assert model.init_ == 7.5
        assert model.train_mse_ == 0.0
        assert all(t.is_leaf and t.value == 0.0 for t in model.trees_)

    def test_first_stage_starts_from_target_mean(self):
        rng = np.random.default_rng(12)
        X = rng.standard_normal((50, 3))
        y = rng.standard_normal(50) + 4.0
        model = GBTRegressor(num_trees=3).fit(X, y)
        assert model.init_ == pytest.approx(y.mean(), rel=1e-15)
        staged = model.staged_predict(X)
        assert staged.shape == (4, 50)
        np.testing.assert_array_equal(staged[0], np.full(50, model.init_))

    def test_binning_splits_are_consistent_with_raw_values(self):
        # Training-time residual fitting and later prediction must agree
        # even though splits are chosen on bin codes: training rows are
        # predicted exactly as the trees that were grown on them say.
        rng = np.random.default_rng(77)
        X = rng.standard_normal((200, 3))
        y = X @ np.array([2.0, -1.0, 0.3]) + 0.1 * rng.standard_normal(200)
        model = GBTRegressor(num_trees=15, max_depth=3, max_bins=8).fit(X, y)
        manual = np.full(200, model.init_)
        for tree in model.trees_:
            manual = manual + model.learning_rate * tree_predict(tree, X)
        np.testing.assert_allclose(model.predict(X), manual,
                                   rtol=0, atol=1e-12)
        assert model.loss_path_[-1] == pytest.approx(
            float(np.mean((y - manual) ** 2)), rel=1e-10)

    def test_learning_rate_bounds(self):
        X, y = regression_fixture(0, n=20)
        with pytest.raises(ValueError):
            GBTRegressor(learning_rate=0.0).fit(X, y)
        with pytest.raises(ValueError):
            GBTRegressor(learning_rate=2.5).fit(X, y)
        GBTRegressor(num_trees=2, learning_rate=2.0).fit(X, y)

    def test_max_bins_validation(self):
        X, y = regression_fixture(0, n=20)
        with pytest.raises(ValueError):
            GBTRegressor(max_bins=1).fit(X, y)
