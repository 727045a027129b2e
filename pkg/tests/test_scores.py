import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fairpolicy.data_model import Assignment, NuisanceEstimates, ScoreMatrix
from fairpolicy.scores import (
    aipw_scores, all_in_one_policy, blackbox_policy, blend_scores, evaluate_policy, iapo_scores, policy_value,
    program_shares,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def nuis(mu, e=None, y=None, d=None):
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    names = tuple(f"t{j}" for j in range(mu.shape[1]))
    return NuisanceEstimates(mu, None if e is None else np.atleast_2d(e), None if y is None else np.asarray(y, float),
                             None if d is None else np.asarray(d), names)


class TestIapo:
    def test_identity(self):
        assert iapo_scores(nuis([[1.0, 2.0]])).values.tolist() == [[1.0, 2.0]]

    def test_zeros(self):
        assert not iapo_scores(nuis(np.zeros((3, 2)))).values.any()

    def test_ignores_e_y_d(self):
        a = iapo_scores(nuis([[1.0, 2.0]], [[0.5, 0.5]], [9.0], [1])).values
        b = iapo_scores(nuis([[1.0, 2.0]], [[0.9, 0.1]], [-3.0], [0])).values
        assert np.array_equal(a, b)


class TestAipw:
    def test_zero_residual(self):
        g = aipw_scores(nuis([[1.0, 2.0]], [[0.3, 0.7]], [2.0], [1]))
        assert g.values.tolist() == [[1.0, 2.0]]

    def test_hand_value(self):
        g = aipw_scores(nuis([[0.5, 0.5]], [[0.75, 0.25]], [1.0], [1]))
        assert g.values[0, 1] == pytest.approx(2.5, abs=1e-12)

    def test_unobserved_column_is_mu(self):
        g = aipw_scores(nuis([[0.5, 0.7]], [[0.75, 0.25]], [100.0], [1]))
        assert g.values[0, 0] == 0.5

    def test_zero_propensity_raises(self):
        with pytest.raises(ValueError, match="zero propensity"):
            aipw_scores(nuis([[0.5, 0.7]], [[1.0, 0.0]], [1.0], [1]))

    def test_reduces_to_y(self):
        g = aipw_scores(nuis(np.zeros((3, 2)), [[1.0, 0.0]] * 3, [1.0, 2.0, 3.0], [0, 0, 0]))
        assert g.values[:, 0].tolist() == [1.0, 2.0, 3.0]


class TestPolicyValue:
    def test_hand_sum(self):
        assert policy_value([1, 0], np.array([[1, 2], [3, 0]])) == 2.5

    def test_single_row(self):
        assert policy_value([0], np.array([[7.0, 9.0]])) == 7.0

    def test_constant(self):
        assert policy_value([0, 1, 1], np.full((3, 2), 4.0)) == 4.0

    @settings(max_examples=50, deadline=None)
    @given(arrays(float, (30, 4), elements=finite), st.integers(0, 2**32 - 1))
    def test_blackbox_dominates(self, g, seed):
        rng = np.random.default_rng(seed)
        best = policy_value(blackbox_policy(g), g)
        for _ in range(5):
            assert policy_value(rng.integers(0, 4, 30), g) <= best + 1e-9 * (1 + abs(best))
        assert policy_value(all_in_one_policy(g)[0], g) <= best + 1e-9 * (1 + abs(best))


class TestBenchmarks:
    def test_argmax(self):
        assert blackbox_policy(np.array([[1, 3, 2]])).treatments.tolist() == [1]

    def test_argmax_tie_lowest(self):
        assert blackbox_policy(np.array([[5, 5]])).treatments.tolist() == [0]

    @settings(max_examples=30, deadline=None)
    @given(arrays(float, (10, 3), elements=st.floats(-100, 100)), st.floats(-100, 100))
    def test_shift_invariance(self, g, c):
        g = np.round(g, 3)
        assert np.array_equal(blackbox_policy(g).treatments, blackbox_policy(g + np.round(c, 3)).treatments)

    def test_all_in_one(self):
        a, best = all_in_one_policy(np.array([[1.0, 1.0], [1.0, 2.0]]))
        assert best == 1 and a.treatments.tolist() == [1, 1]

    def test_all_in_one_single_treatment(self):
        assert all_in_one_policy(np.ones((3, 1)))[1] == 0

    def test_all_in_one_tie(self):
        assert all_in_one_policy(np.array([[2.0, 2.0], [2.0, 2.0]]))[1] == 0


class TestBlend:
    def setup_method(self):
        self.a = ScoreMatrix(np.array([[10.0, 0.0]]), ("x", "y"))
        self.b = ScoreMatrix(np.array([[20.0, 2.0]]), ("x", "y"))

    def test_endpoints(self):
        assert blend_scores(self.a, self.b, 0.0) is self.a
        assert blend_scores(self.a, self.b, 1.0) is self.b

    def test_midpoint(self):
        assert blend_scores(self.a, self.b, 0.5).values[0, 0] == 15.0

    @pytest.mark.parametrize("lam", [-0.1, 1.5])
    def test_range(self, lam):
        with pytest.raises(ValueError):
            blend_scores(self.a, self.b, lam)


def test_evaluate_policy_shares():
    g = ScoreMatrix(np.arange(12, dtype=float).reshape(4, 3), ("a", "b", "c"))
    rep = evaluate_policy(Assignment(np.array([0, 1, 1, 2]), 3), g, np.array([0, 0, 1, 1]))
    assert rep.program_shares.tolist() == [0.25, 0.5, 0.25]
    assert abs(rep.program_shares.sum() - 1) < 1e-9
    assert program_shares([0, 0], 3).tolist() == [1.0, 0.0, 0.0]
