import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairpolicy.data_model import FeatureTable
from fairpolicy.policy_tree import (
    ADJUSTED, CDF, Node, PolicyTree, enumerate_candidates, fit_tree, predict_tree, to_cdf_scale,
)
from fairpolicy.scores import blackbox_policy, policy_value
from oracles import brute_force_value


def random_instance(rng, n_max=50, n_features=2, max_cands=5, n_treatments=3):
    n = int(rng.integers(5, n_max + 1))
    x = rng.integers(0, 8, (n, n_features)).astype(float)
    g = rng.integers(-5, 6, (n, n_treatments))
    cands = [np.sort(rng.choice(np.arange(8) + 0.5, rng.integers(1, max_cands + 1), replace=False))
             for _ in range(n_features)]
    return x, g, cands


def fitted_sum(tree, x, g):
    d = tree.predict(x)
    return g[np.arange(len(x)), d].sum()


class TestCandidates:
    def test_binary_midpoint(self):
        assert enumerate_candidates([0, 1, 1, 0], "discrete").tolist() == [0.5]

    def test_constant_column(self):
        assert enumerate_candidates(np.full(10, 3.0), "continuous").size == 0
        assert enumerate_candidates(np.full(10, 3.0), "discrete").size == 0

    def test_quantile_grid(self):
        c = enumerate_candidates(np.arange(1, 1001), "continuous", n_points=3)
        assert np.allclose(c, [250.75, 500.5, 750.25])

    def test_count_and_order(self):
        x = np.random.default_rng(0).normal(size=5000)
        c = enumerate_candidates(x, "continuous", 100)
        assert len(c) <= 100 and np.all(np.diff(c) > 0)

    def test_bad_n_points(self):
        with pytest.raises(ValueError):
            enumerate_candidates([1.0, 2.0], "continuous", 0)


class TestFitTree:
    def test_depth_zero_is_all_in_one(self):
        tree = fit_tree(np.zeros((2, 1)), np.array([[1.0, 1.0], [1.0, 2.0]]), depth=0)
        assert tree.root.is_leaf and tree.root.treatment == 1

    def test_single_split_by_hand(self):
        x = np.arange(1, 7, dtype=float)[:, None]
        g = np.column_stack([np.where(x[:, 0] > 3, 0.0, 1.0), np.where(x[:, 0] > 3, 1.0, 0.0)])
        tree = fit_tree(x, g, depth=1, candidates=[np.array([3.0])])
        r = tree.root
        assert (r.feature, r.threshold, r.left.treatment, r.right.treatment) == (0, 3.0, 0, 1)

    def test_prefers_leaf_on_ties(self):
        tree = fit_tree(np.arange(6.0)[:, None], np.ones((6, 2)), depth=2)
        assert tree.root.is_leaf and tree.root.treatment == 0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(123)
        for _ in range(60):
            x, g, cands = random_instance(rng)
            depth = int(rng.integers(0, 3))
            tree = fit_tree(x, g, depth=depth, candidates=cands)
            assert fitted_sum(tree, x, g) == brute_force_value(x, g, cands, depth)

    def test_depth_three_matches_brute_force(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            x, g, cands = random_instance(rng, n_max=25, n_features=1, max_cands=3, n_treatments=2)
            tree = fit_tree(x, g, depth=3, candidates=cands)
            assert fitted_sum(tree, x, g) == brute_force_value(x, g, cands, 3)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_depth_monotone_and_dominated(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(80, 2))
        g = rng.normal(size=(80, 3))
        values = [fit_tree(x, g, depth=d, n_points=8).train_value for d in range(4)]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
        assert values[-1] <= policy_value(blackbox_policy(g), g) + 1e-12

    def test_row_permutation_invariant(self):
        rng = np.random.default_rng(2)
        x, g, cands = random_instance(rng)
        perm = rng.permutation(len(x))
        a = fit_tree(x, g, depth=2, candidates=cands)
        b = fit_tree(x[perm], g[perm], depth=2, candidates=cands)
        assert fitted_sum(a, x, g) == fitted_sum(b, x[perm], g[perm])

    def test_train_value_recomputes(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(200, 3))
        g = rng.normal(size=(200, 4))
        tree = fit_tree(x, g, depth=2, n_points=10)
        assert policy_value(predict_tree(tree, x), g) == tree.train_value

    def test_discrete_kinds(self):
        x = np.column_stack([np.repeat([0.0, 1.0, 2.0], 10)])
        g = np.column_stack([x[:, 0] == 1, x[:, 0] != 1]).astype(float)
        tree = fit_tree(FeatureTable.from_arrays(x, ["d"], ["discrete"]), g, depth=2)
        assert tree.train_value == 1.0
        assert {n.threshold for n in tree.root.nodes() if not n.is_leaf} <= {0.5, 1.5}

    @pytest.mark.parametrize("depth", [-1, 4])
    def test_depth_range(self, depth):
        with pytest.raises(ValueError):
            fit_tree(np.zeros((3, 1)), np.zeros((3, 2)), depth=depth)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            fit_tree(np.array([[np.nan], [1.0]]), np.zeros((2, 2)))


class TestPredict:
    def test_leaf(self):
        tree = PolicyTree(Node(treatment=2), ("x",))
        assert predict_tree(tree, np.zeros((4, 1))).treatments.tolist() == [2] * 4

    def test_equal_goes_left(self):
        tree = PolicyTree(Node(feature=0, threshold=1.0, left=Node(treatment=0), right=Node(treatment=1)), ("x",))
        assert predict_tree(tree, np.array([[1.0], [1.0 + 1e-12]])).treatments.tolist() == [0, 1]

    def test_dict_round_trip(self):
        rng = np.random.default_rng(0)
        x, g = rng.normal(size=(100, 2)), rng.normal(size=(100, 3))
        tree = fit_tree(x, g, depth=2, n_points=5, feature_names=["a", "b"], treatment_names=("u", "v", "w"))
        back = PolicyTree.from_dict(tree.to_dict())
        assert np.array_equal(back.predict(x), tree.predict(x))
        assert back.treatment_names == ("u", "v", "w")
        assert "a <=" in tree.render() or "b <=" in tree.render()


def test_to_cdf_scale_keeps_routing():
    from fairpolicy.data_model import SensitiveVector
    from fairpolicy.fair_adjust import mq_adjust_table

    rng = np.random.default_rng(0)
    feats = FeatureTable.from_arrays(rng.normal(size=(300, 2)), ["a", "b"])
    sens = SensitiveVector(rng.integers(0, 3, 300), ("x", "y", "z"))
    adj = mq_adjust_table(feats, sens, 0)
    g = rng.normal(size=(300, 3))
    tree = fit_tree(adj.adjusted, g, depth=3, n_points=20, scale=ADJUSTED)
    cdf_tree = to_cdf_scale(tree, adj.model)
    assert cdf_tree.scale == CDF
    assert np.array_equal(tree.predict(adj.adjusted), cdf_tree.predict(adj.p_values))
    with pytest.raises(ValueError):
        to_cdf_scale(cdf_tree, adj.model)
