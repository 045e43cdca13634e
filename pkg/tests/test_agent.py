import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from banditlab.agent import (
    NoAvailableArms,
    PolicyWeights,
    StopDecision,
    StopRule,
    apply_floor,
    prob_best,
    stopping_decision,
)


class TestProbBest:
    def test_two_arm_enumeration(self):
        # each arm wins exactly half the draws
        draws = np.array([[0.3, 0.1], [0.1, 0.3], [0.5, 0.2], [0.2, 0.5]])
        np.testing.assert_allclose(prob_best(draws), [0.5, 0.5])

    def test_ties_go_to_lowest_index(self):
        draws = np.array([[0.2, 0.2], [0.2, 0.2]])
        np.testing.assert_allclose(prob_best(draws), [1.0, 0.0])

    def test_unavailable_arm_gets_zero(self):
        draws = np.array([[0.9, 0.1, 0.5], [0.8, 0.2, 0.4]])
        out = prob_best(draws, available=np.array([False, True, True]))
        assert out[0] == 0.0
        np.testing.assert_allclose(out, [0.0, 0.0, 1.0])

    def test_all_unavailable_raises(self):
        with pytest.raises(NoAvailableArms):
            prob_best(np.array([[0.1, 0.2]]), available=np.array([False, False]))

    @settings(max_examples=50, deadline=None)
    @given(
        draws=hnp.arrays(
            float,
            hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=6),
            elements=st.floats(-5, 5),
        )
    )
    def test_simplex_invariant(self, draws):
        out = prob_best(draws)
        assert np.all(out >= 0)
        assert out.sum() == pytest.approx(1.0)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_monotone_transform_invariance(self, seed):
        rng = np.random.default_rng(seed)
        draws = rng.normal(size=(40, 3))
        base = prob_best(draws)
        warped = prob_best(np.exp(2.0 * draws) + 1.0)
        np.testing.assert_allclose(base, warped)


class TestApplyFloor:
    def test_spec_mixture(self):
        w = PolicyWeights(w=np.array([1.0, 0.0]), available=np.array([True, True]))
        out = apply_floor(w, 0.1)
        np.testing.assert_allclose(out.w, [0.95, 0.05])

    def test_zero_floor_is_identity(self):
        w = PolicyWeights(w=np.array([0.7, 0.3]), available=np.array([True, True]))
        out = apply_floor(w, 0.0)
        np.testing.assert_allclose(out.w, w.w)

    def test_floor_respects_availability(self):
        w = PolicyWeights(
            w=np.array([1.0, 0.0, 0.0]), available=np.array([True, True, False])
        )
        out = apply_floor(w, 0.2)
        assert out.w[2] == 0.0
        np.testing.assert_allclose(out.w, [0.9, 0.1, 0.0])

    @settings(max_examples=40, deadline=None)
    @given(
        seed=st.integers(0, 10**6),
        eps=st.floats(0.0, 0.99),
    )
    def test_stays_on_simplex(self, seed, eps):
        rng = np.random.default_rng(seed)
        raw = rng.dirichlet(np.ones(4))
        out = apply_floor(
            PolicyWeights(w=raw, available=np.ones(4, dtype=bool)), eps
        )
        assert out.w.sum() == pytest.approx(1.0)
        assert np.all(out.w >= eps / 4 - 1e-12)


class TestPolicyWeights:
    def test_rejects_off_simplex(self):
        with pytest.raises(ValueError):
            PolicyWeights(w=np.array([0.5, 0.6]), available=np.array([True, True]))

    def test_rejects_weight_on_unavailable(self):
        with pytest.raises(ValueError):
            PolicyWeights(w=np.array([0.5, 0.5]), available=np.array([True, False]))


class TestStopRule:
    def test_stops_at_threshold(self):
        rule = StopRule(threshold=0.95, min_days=0)
        d = stopping_decision(np.array([0.96, 0.04]), day=4, rule=rule)
        assert d.stopped and d.winner == 0 and d.day == 4

    def test_exact_threshold_stops(self):
        rule = StopRule(threshold=0.95, min_days=0)
        d = stopping_decision(np.array([0.95, 0.05]), day=2, rule=rule)
        assert d.stopped

    def test_min_days_blocks_early_stop(self):
        rule = StopRule(threshold=0.9, min_days=7)
        d = stopping_decision(np.array([0.99, 0.01]), day=7, rule=rule)
        assert not d.stopped
        d = stopping_decision(np.array([0.99, 0.01]), day=8, rule=rule)
        assert d.stopped

    def test_below_threshold_keeps_running(self):
        rule = StopRule(threshold=0.95)
        d = stopping_decision(np.array([0.9, 0.1]), day=30, rule=rule)
        assert not d.stopped and d.winner is None

    def test_threshold_monotonicity(self):
        # any stop at a high threshold also stops at a lower one
        probs = np.array([0.93, 0.07])
        for lo, hi in [(0.55, 0.9), (0.6, 0.93), (0.9, 0.99)]:
            d_hi = stopping_decision(probs, 5, StopRule(threshold=hi))
            d_lo = stopping_decision(probs, 5, StopRule(threshold=lo))
            if d_hi.stopped:
                assert d_lo.stopped

    def test_degenerate_threshold_warns(self):
        rule = StopRule(threshold=0.4, min_days=0)
        with pytest.warns(UserWarning):
            stopping_decision(np.array([0.5, 0.5]), day=1, rule=rule)

    def test_json_round_trip(self):
        rule = StopRule(threshold=0.9, min_days=7, exploration_floor=0.05)
        back = StopRule.from_json(rule.to_json())
        assert back == rule
        obj = json.loads(rule.to_json())
        assert set(obj) == {"threshold", "min_days", "floor"}

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            StopRule(threshold=1.0)
        with pytest.raises(ValueError):
            StopRule(threshold=0.9, min_days=-1)
        with pytest.raises(ValueError):
            StopRule(threshold=0.9, exploration_floor=1.0)
