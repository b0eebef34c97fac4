import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exhaustive_best_split, fd_grad_hess
from spforge.gbt import (
    best_split,
    grad_hess,
    grow_tree,
    leaf_weight,
    log_loss,
    softmax,
    tree_depth,
    tree_predict,
)
from spforge.gbt.model import TrainConfig


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax(np.zeros(5)), [0.2] * 5)

    def test_shift_invariance(self):
        s = np.array([0.3, -1.2, 2.0, 0.0, 0.7])
        np.testing.assert_allclose(softmax(s), softmax(s + 7), rtol=1e-12)

    def test_closed_form(self):
        np.testing.assert_allclose(softmax(np.array([math.log(2), 0.0])), [2 / 3, 1 / 3], rtol=1e-12)

    def test_no_overflow(self):
        out = softmax(np.array([1e4, 0.0]))
        assert np.all(np.isfinite(out))
        assert out.sum() == pytest.approx(1.0, abs=1e-12)

    def test_batched(self):
        s = np.array([[0.0, 1.0], [2.0, 2.0]])
        out = softmax(s)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(out[1], [0.5, 0.5])

    @given(st.lists(st.floats(min_value=-50, max_value=50), min_size=2, max_size=8))
    def test_sums_to_one(self, scores):
        out = softmax(np.array(scores))
        assert out.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(out >= 0)


class TestGradHess:
    def test_uniform_five_class(self):
        g, h = grad_hess(np.full(5, 0.2), 0)
        np.testing.assert_allclose(g, [-0.8, 0.2, 0.2, 0.2, 0.2], atol=1e-15)
        np.testing.assert_allclose(h, [0.16] * 5, atol=1e-15)

    def test_perfect_prediction(self):
        g, h = grad_hess(np.array([1.0, 0.0, 0.0]), 0)
        assert g[0] == 0.0
        assert h[0] == 0.0

    def test_bad_class(self):
        with pytest.raises(ValueError):
            grad_hess(np.full(5, 0.2), 5)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            scores = rng.uniform(-2, 2, size=5)
            true_class = int(rng.integers(5))
            g, h = grad_hess(softmax(scores), true_class)
            g_fd, h_fd = fd_grad_hess(scores, true_class)
            np.testing.assert_allclose(g, g_fd, rtol=1e-4, atol=1e-8)
            np.testing.assert_allclose(h, h_fd, rtol=1e-4, atol=1e-8)


class TestLogLoss:
    def test_uniform(self):
        assert log_loss(np.zeros((4, 5)), np.array([0, 1, 2, 3])) == pytest.approx(math.log(5))

    def test_confident_correct_is_small(self):
        scores = np.array([[10.0, 0.0], [0.0, 10.0]])
        assert log_loss(scores, np.array([0, 1])) < 1e-4


class TestLeafWeight:
    def test_formula(self):
        assert leaf_weight(-0.8, 0.16, 1.0) == pytest.approx(0.8 / 1.16)

    def test_zero_gradient(self):
        assert leaf_weight(0.0, 3.0, 1.0) == 0.0

    def test_lambda_shrinks(self):
        assert abs(leaf_weight(-2.0, 1.0, 2.0)) < abs(leaf_weight(-2.0, 1.0, 1.0))

    def test_degenerate(self):
        with pytest.raises(ValueError):
            leaf_weight(1.0, 0.0, 0.0)


def config(**kw):
    defaults = dict(gamma=0.0, min_child_weight=0.0, reg_lambda=1.0)
    defaults.update(kw)
    return defaults


class TestBestSplit:
    def test_hand_computed_gain(self):
        # G_L=-2, H_L=2 | G_R=2, H_R=2, lambda=1, gamma=1 -> 1/2*(4/3+4/3) - 1 = 1/3
        X = np.array([[0.0], [1.0]])
        g = np.array([-2.0, 2.0])
        h = np.array([2.0, 2.0])
        split = best_split(X, g, h, reg_lambda=1.0, gamma=1.0, min_child_weight=0.0)
        assert split is not None
        assert split.feature == 0
        assert split.threshold == 0.5
        assert split.gain == pytest.approx(1 / 3, rel=1e-12)

    def test_large_gamma_blocks(self):
        X = np.array([[0.0], [1.0]])
        g = np.array([-2.0, 2.0])
        h = np.array([2.0, 2.0])
        assert best_split(X, g, h, reg_lambda=1.0, gamma=10.0, min_child_weight=0.0) is None

    def test_min_child_weight_rejects(self):
        X = np.array([[0.0], [1.0]])
        g = np.array([-2.0, 2.0])
        h = np.array([2.9, 3.5])
        assert best_split(X, g, h, reg_lambda=1.0, gamma=0.0, min_child_weight=3.0) is None
        ok = best_split(X, g, h, reg_lambda=1.0, gamma=0.0, min_child_weight=2.9)
        assert ok is not None

    def test_constant_feature(self):
        X = np.ones((5, 2))
        g = np.array([-1.0, 1.0, -1.0, 1.0, -1.0])
        h = np.ones(5)
        assert best_split(X, g, h, reg_lambda=1.0, gamma=0.0, min_child_weight=0.0) is None

    def test_tie_breaks_to_lowest_feature(self):
        # identical columns: identical gains, feature 0 must win
        col = np.array([0.0, 1.0, 2.0, 3.0])
        X = np.column_stack([col, col, col])
        g = np.array([-3.0, -1.0, 2.0, 2.0])
        h = np.ones(4)
        split = best_split(X, g, h, reg_lambda=1.0, gamma=0.0, min_child_weight=0.0)
        assert split.feature == 0

    def test_tie_breaks_to_lowest_threshold(self):
        # symmetric +/- gradients: thresholds 1.5 and 2.5 give equal gain
        X = np.array([[1.0], [2.0], [3.0]])
        g = np.array([-1.0, 0.0, 1.0])
        h = np.ones(3)
        split = best_split(X, g, h, reg_lambda=1.0, gamma=0.0, min_child_weight=0.0)
        assert split.threshold == 1.5

    def test_feature_subset_respected(self):
        col = np.array([0.0, 1.0, 2.0, 3.0])
        X = np.column_stack([col, col])
        g = np.array([-3.0, -1.0, 2.0, 2.0])
        h = np.ones(4)
        split = best_split(
            X, g, h, reg_lambda=1.0, gamma=0.0, min_child_weight=0.0, feature_indices=[1]
        )
        assert split.feature == 1

    def test_agrees_with_exhaustive_oracle(self):
        rng = np.random.default_rng(7)
        for trial in range(60):
            n = int(rng.integers(2, 40))
            d = int(rng.integers(1, 6))
            X = rng.uniform(-3, 3, size=(n, d))
            g = rng.normal(size=n)
            h = rng.uniform(0.01, 1.0, size=n)
            lam = float(rng.uniform(0, 2))
            gamma = float(rng.choice([0.0, 0.5, 1.0]))
            mcw = float(rng.choice([0.0, 1.0, 3.0]))
            ours = best_split(X, g, h, reg_lambda=lam, gamma=gamma, min_child_weight=mcw)
            ref = exhaustive_best_split(X, g, h, reg_lambda=lam, gamma=gamma, min_child_weight=mcw)
            if ref is None:
                assert ours is None
            else:
                gain, feature, threshold = ref
                assert ours is not None
                assert ours.feature == feature
                assert ours.threshold == threshold
                assert ours.gain == pytest.approx(gain, abs=1e-10)


class TestGrowTree:
    def grow(self, X, g, h, **kw):
        params = dict(max_depth=4, reg_lambda=1.0, gamma=0.0, min_child_weight=0.0)
        params.update(kw)
        return grow_tree(X, g, h, **params)

    def test_respects_max_depth(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(size=(100, 3))
        g = rng.normal(size=100)
        h = rng.uniform(0.1, 1.0, size=100)
        for depth in (1, 2, 3):
            tree = self.grow(X, g, h, max_depth=depth)
            assert tree_depth(tree) <= depth

    def test_single_row_is_leaf(self):
        tree = self.grow(np.array([[1.0, 2.0]]), np.array([-1.0]), np.array([0.5]))
        assert tree.is_leaf
        assert tree.weight == pytest.approx(1.0 / 1.5)

    def test_leaf_hessian_mass(self):
        # every leaf produced by splitting carries >= min_child_weight hessian
        rng = np.random.default_rng(1)
        X = rng.uniform(size=(80, 4))
        g = rng.normal(size=80)
        h = rng.uniform(0.05, 0.3, size=80)
        mcw = 1.5
        tree = self.grow(X, g, h, min_child_weight=mcw, max_depth=5)

        def check(node, rows):
            hs = h[rows].sum()
            if node.is_leaf:
                assert hs >= mcw or node is tree  # root fallback is exempt
                return
            mask = X[rows, node.feature] < node.threshold
            check(node.left, rows[mask])
            check(node.right, rows[~mask])

        check(tree, np.arange(80))

    def test_unsplittable_root_becomes_leaf(self):
        X = np.ones((10, 2))
        g = np.ones(10)
        h = np.ones(10)
        tree = self.grow(X, g, h)
        assert tree.is_leaf
        assert tree.weight == pytest.approx(-10.0 / 11.0)

    def test_predict_routes_by_threshold(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        g = np.array([-2.0, -2.0, 2.0, 2.0])
        h = np.ones(4)
        tree = self.grow(X, g, h, max_depth=1)
        assert not tree.is_leaf
        out = tree_predict(tree, X)
        assert out[0] == out[1]
        assert out[2] == out[3]
        assert out[0] > 0 > out[2]

    def test_dict_round_trip(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(size=(60, 3))
        g = rng.normal(size=60)
        h = rng.uniform(0.1, 1.0, size=60)
        tree = self.grow(X, g, h)
        from spforge.gbt import TreeNode

        rebuilt = TreeNode.from_dict(tree.to_dict())
        np.testing.assert_array_equal(tree_predict(tree, X), tree_predict(rebuilt, X))


class TestTrainConfig:
    def test_defaults_follow_tuned_setup(self):
        cfg = TrainConfig()
        assert cfg.n_estimators == 75
        assert cfg.max_depth == 4
        assert cfg.learning_rate == 0.1
        assert cfg.gamma == 1.0
        assert cfg.min_child_weight == 3.0
        assert cfg.early_stopping_rounds == 15

    def test_invariants(self):
        with pytest.raises(ValueError):
            TrainConfig(n_estimators=0)
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=1.5)
        with pytest.raises(ValueError):
            TrainConfig(subsample=0.0)
        with pytest.raises(ValueError):
            TrainConfig(gamma=-1)

    def test_dict_round_trip(self):
        cfg = TrainConfig(seed=9, subsample=0.8)
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown"):
            TrainConfig.from_dict({"n_trees": 10})
