import numpy as np
import pytest

from banditlab.core import validate_dataset
from banditlab.ppc import lag1_ac
from banditlab.simulate import (
    ArmSchedule,
    GenConfig,
    RateSchedule,
    ScheduleOutOfRange,
    Segment,
    gen_arm_addition,
    gen_drift,
    gen_fixed,
    generate,
    true_rate_table,
)


class TestTrueRateTable:
    def test_static_arm_is_constant(self):
        sched = RateSchedule(arms=(ArmSchedule(0.2),), num_days=5)
        table = true_rate_table(sched)
        np.testing.assert_allclose(table[:, 0], 0.2)

    def test_piecewise_drift_arithmetic(self):
        # down 0.005/day from day 2 through day 21, up from day 22
        segments = (Segment(2, -0.005), Segment(22, 0.005), Segment(52, 0.0))
        sched = RateSchedule(arms=(ArmSchedule(0.20, segments),), num_days=60)
        table = true_rate_table(sched)[:, 0]
        assert table[0] == pytest.approx(0.20)
        assert table[20] == pytest.approx(0.10)  # day 21: trough
        assert table[50] == pytest.approx(0.25)  # day 51: back up +0.15
        np.testing.assert_allclose(table[51:], 0.25)  # held flat

    def test_pre_availability_is_nan(self):
        sched = RateSchedule(
            arms=(ArmSchedule(0.2), ArmSchedule(0.3, start_day=4)), num_days=6
        )
        table = true_rate_table(sched)
        assert np.isnan(table[:3, 1]).all()
        assert np.isfinite(table[3:, 1]).all()

    def test_rate_leaving_unit_interval_raises(self):
        sched = RateSchedule(
            arms=(ArmSchedule(0.05, (Segment(2, -0.01),)),), num_days=10
        )
        with pytest.raises(ScheduleOutOfRange):
            true_rate_table(sched)

    def test_start_days_must_be_sorted(self):
        with pytest.raises(ValueError):
            RateSchedule(
                arms=(ArmSchedule(0.2, start_day=5), ArmSchedule(0.2, start_day=2)),
                num_days=10,
            )


class TestGenerate:
    def test_deterministic_under_seed(self):
        a = gen_fixed(seed=3)
        b = gen_fixed(seed=3)
        np.testing.assert_array_equal(a.y, b.y)

    def test_seeds_differ(self):
        assert not np.array_equal(gen_fixed(seed=1).y, gen_fixed(seed=2).y)

    def test_no_validation_violations(self):
        for d in (gen_fixed(0), gen_drift(0), gen_arm_addition(0)):
            assert validate_dataset(d) == []

    def test_overdispersion_variance_oracle(self):
        # Var(Y) = N theta (1-theta) (1 + (N-1) gamma) under the BB mixture.
        sched = RateSchedule(arms=(ArmSchedule(0.2),), num_days=4000)
        cfg = GenConfig(arrivals=500, gamma=0.02, seed=9)
        d = generate(sched, cfg)
        theta, n = 0.2, 500
        expect = n * theta * (1 - theta) * (1 + (n - 1) * cfg.gamma)
        ratio = d.y[:, 0].var() / expect
        assert 0.9 < ratio < 1.1

    def test_gamma_zero_is_pure_binomial(self):
        sched = RateSchedule(arms=(ArmSchedule(0.2),), num_days=4000)
        d = generate(sched, GenConfig(arrivals=500, gamma=0.0, seed=9))
        expect = 500 * 0.2 * 0.8
        assert 0.9 < d.y[:, 0].var() / expect < 1.1

    def test_overdispersed_rates_autocorrelate(self):
        # daily mixture draws are iid, so cumulative-mean-relative daily
        # rates show no negative AC drag; raw daily rate AC around 0 but
        # overdispersion inflates within-day variance
        d = gen_fixed(seed=0)
        rates = d.y[:, 0] / d.n[:, 0]
        # iid mixture: lag-1 AC should be near zero, well inside (-0.5, 0.5)
        assert abs(lag1_ac(rates)) < 0.5


class TestCaseGenerators:
    def test_fixed_shapes_and_truth(self):
        d = gen_fixed(0)
        assert d.n.shape == (30, 2)
        np.testing.assert_allclose(d.true_rates()[:, 0], 0.20)
        np.testing.assert_allclose(d.true_rates()[:, 1], 0.21)

    def test_drift_constant_gain(self):
        d = gen_drift(0)
        assert d.n.shape == (60, 2)
        gain = d.true_rates()[:, 1] - d.true_rates()[:, 0]
        np.testing.assert_allclose(gain, 0.01)

    def test_drift_rates_strongly_autocorrelated(self):
        # the moving rate dominates Binomial noise at 500 arrivals/day
        hits = 0
        for seed in range(10):
            d = gen_drift(seed)
            rates = d.y / d.n
            if all(lag1_ac(rates[:, a]) > 0.5 for a in range(2)):
                hits += 1
        assert hits >= 8

    def test_arm_addition_schedule(self):
        d = gen_arm_addition(0)
        assert d.n.shape == (45, 5)
        truth = d.true_rates()
        # 1-based start days 11/21/31 -> 0-based first rows 10/20/30
        for j, first in [(2, 10), (3, 20), (4, 30)]:
            assert np.isnan(truth[:first, j]).all()
            assert d.n[:first, j].sum() == 0
            assert (d.n[first:, j] == 500).all()
            np.testing.assert_allclose(truth[first:, j], truth[first:, 1])
            # duplicates carry a2's observed counts, not fresh draws
            np.testing.assert_array_equal(d.y[first:, j], d.y[first:, 1])
