"""Golden-figure pipeline: pinned case-study CSVs render to frozen hashes.

The inputs under tests/data/ were produced by the banditlab CLI on pinned
seeds (ppc --case fixed --seed 0 --model ibb; fit --case drift --seed 0
--model bbdrift --chains 2 --warmup 400 --draws 400).  The hashes pin the
rendering stack as well as the figure code; regenerate them if matplotlib
or freetype is upgraded.
"""

import hashlib
from pathlib import Path

import pytest

from banditplots import FigureSpec, render

DATA = Path(__file__).parent / "data"

GOLDEN = {
    "gains": "8f57421c63c0f39a420ed8b9c6c3c02a409685f085826784e91ad3ce025d195e",
    "coverage": "513c6e647e13354b89e78c5e8899863da3204b3334f2650a0935a344f8be1d45",
}


def _hash(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def test_gains_golden(tmp_path):
    out = tmp_path / "gains.png"
    render(FigureSpec(kind="gains", source=str(DATA / "gain_timeseries.csv"),
                      out=str(out), true_gain=0.01))
    assert _hash(out) == GOLDEN["gains"]


def test_coverage_golden(tmp_path):
    out = tmp_path / "coverage.png"
    render(FigureSpec(kind="coverage",
                      source=str(DATA / "coverage_arm1.csv"),
                      out=str(out)))
    assert _hash(out) == GOLDEN["coverage"]


@pytest.mark.parametrize("name", ["gain_timeseries.csv", "coverage_arm1.csv"])
def test_pinned_inputs_present(name):
    assert (DATA / name).stat().st_size > 0
