import pytest


@pytest.fixture
def coverage_csv(tmp_path):
    """Hand-built 5-row coverage file: rows 2 and 5 are misses."""
    p = tmp_path / "coverage_arm1.csv"
    p.write_text(
        "day,lo,hi,empirical,covered\n"
        "1,0.18,0.24,0.20,true\n"
        "2,0.18,0.24,0.30,false\n"
        "3,0.17,0.23,0.22,true\n"
        "4,0.18,0.25,0.19,true\n"
        "5,0.19,0.25,0.10,false\n"
    )
    return p


@pytest.fixture
def policy_csv(tmp_path):
    p = tmp_path / "policy_timeseries.csv"
    lines = ["day,arm,weight,theta_mean,theta_lo,theta_hi"]
    for day in range(1, 6):
        blank = day == 1  # no fit before day 2
        for arm, w in (("a1", 0.4 + 0.05 * day), ("a2", 0.6 - 0.05 * day)):
            if blank:
                lines.append(f"{day},{arm},0.5,,,")
            else:
                m = 0.2 if arm == "a1" else 0.21
                lines.append(f"{day},{arm},{w},{m},{m - 0.02},{m + 0.02}")
    p.write_text("\n".join(lines) + "\n")
    return p


@pytest.fixture
def gains_csv(tmp_path):
    p = tmp_path / "gain_timeseries.csv"
    lines = ["day,mean,lo68,hi68,lo80,hi80,lo95,hi95"]
    for day in range(1, 8):
        m = 0.01
        lines.append(
            f"{day},{m},{m - 0.004},{m + 0.004},{m - 0.006},{m + 0.006},"
            f"{m - 0.01},{m + 0.01}"
        )
    p.write_text("\n".join(lines) + "\n")
    return p


@pytest.fixture
def comparison_json(tmp_path):
    p = tmp_path / "comparison.json"
    p.write_text(
        '{"coefficients": ['
        '{"name": "intercept", "mean": 0.2, "ci90": [0.19, 0.21]},'
        '{"name": "model[BB-Drift]", "mean": 0.002, "ci90": [-0.003, 0.007]},'
        '{"name": "model[BB-Coint]", "mean": 0.001, "ci90": [-0.004, 0.006]}'
        '], "contrasts": {}, "max_rhat": 1.01}'
    )
    return p
