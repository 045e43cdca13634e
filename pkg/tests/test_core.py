import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from banditlab.core import (
    BatchDataset,
    empirical_rates,
    load_dataset,
    save_dataset,
    validate_dataset,
)


def _simple(n, y, avail=None, truth=None):
    n = np.asarray(n)
    avail = np.ones(n.shape, dtype=bool) if avail is None else np.asarray(avail)
    labels = tuple(f"a{i+1}" for i in range(n.shape[1]))
    return BatchDataset(
        n=n, y=np.asarray(y), avail=avail, arm_labels=labels, truth=truth
    )


class TestValidate:
    def test_clean_dataset_has_no_violations(self, small_dataset):
        assert validate_dataset(small_dataset) == []

    def test_y_exceeding_n_flagged(self):
        d = _simple([[10, 10]], [[11, 3]])
        rules = [v.rule for v in validate_dataset(d)]
        assert "Y>N" in rules

    def test_traffic_on_unavailable_arm_flagged(self):
        d = _simple([[10, 10]], [[1, 1]], avail=[[True, False]])
        rules = [v.rule for v in validate_dataset(d)]
        assert "unavailable arm has traffic" in rules

    def test_availability_gap_flagged(self):
        avail = np.array([[True], [False], [True]])
        d = _simple([[5], [0], [5]], [[1], [0], [1]], avail=avail)
        out = validate_dataset(d)
        assert any(v.rule == "availability gap" and v.day == 1 for v in out)

    def test_truth_outside_unit_interval_flagged(self):
        d = _simple([[10]], [[3]], truth=np.array([[1.5]]))
        assert any("true rate" in v.rule for v in validate_dataset(d))


class TestEmpiricalRates:
    def test_daily_rate_is_y_over_n(self):
        d = _simple([[10, 20]], [[3, 5]])
        emp = empirical_rates(d)
        assert emp.daily[0, 0] == pytest.approx(0.3)
        assert emp.daily[0, 1] == pytest.approx(0.25)

    def test_zero_n_day_is_undefined_not_zero(self):
        d = _simple([[10], [0]], [[3], [0]], avail=[[True], [True]])
        emp = empirical_rates(d)
        assert not emp.defined[1, 0]
        assert np.isnan(emp.daily[1, 0])

    def test_cumulative_pools_counts(self):
        d = _simple([[10], [30]], [[1], [9]])
        emp = empirical_rates(d)
        assert emp.cumulative[1, 0] == pytest.approx(10 / 40)


class TestRoundTrip:
    def test_csv_round_trip_exact(self, tmp_path, small_dataset):
        p = tmp_path / "d.csv"
        save_dataset(small_dataset, p)
        back = load_dataset(p)
        np.testing.assert_array_equal(back.n, small_dataset.n)
        np.testing.assert_array_equal(back.y, small_dataset.y)
        np.testing.assert_array_equal(back.avail, small_dataset.avail)
        assert back.arm_labels == small_dataset.arm_labels
        np.testing.assert_array_equal(
            np.isnan(back.true_rates()), np.isnan(small_dataset.true_rates())
        )
        m = ~np.isnan(small_dataset.true_rates())
        np.testing.assert_array_equal(
            back.true_rates()[m], small_dataset.true_rates()[m]
        )

    def test_sidecar_written_when_given(self, tmp_path, small_dataset):
        p = tmp_path / "d.csv"
        save_dataset(small_dataset, p, sidecar={"seed": 3})
        assert (tmp_path / "d.json").exists()

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_round_trip_property(self, tmp_path_factory, seed):
        rng = np.random.default_rng(seed)
        t, a = int(rng.integers(1, 8)), int(rng.integers(1, 4))
        n = rng.integers(0, 100, (t, a))
        y = rng.binomial(n, 0.3)
        avail = n > 0
        d = BatchDataset(
            n=n * avail, y=y * avail, avail=avail,
            arm_labels=tuple(f"a{i+1}" for i in range(a)),
        )
        p = tmp_path_factory.mktemp("rt") / "d.csv"
        save_dataset(d, p)
        back = load_dataset(p)
        np.testing.assert_array_equal(back.n, d.n)
        np.testing.assert_array_equal(back.y, d.y)


class TestThroughDay:
    def test_prefix_view(self, small_dataset):
        sub = small_dataset.through_day(4)
        assert sub.num_days == 5
        np.testing.assert_array_equal(sub.n, small_dataset.n[:5])

    def test_first_available_day(self, small_dataset):
        assert small_dataset.first_available_day(2) == 4
        assert small_dataset.first_available_day(0) == 0
