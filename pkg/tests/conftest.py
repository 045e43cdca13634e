import numpy as np
import pytest

from banditlab.core import BatchDataset


@pytest.fixture
def small_dataset():
    """12 days x 3 arms, arm 3 appears on day 5, mild rate spread."""
    rng = np.random.default_rng(42)
    t, a = 12, 3
    avail = np.ones((t, a), dtype=bool)
    avail[:4, 2] = False
    n = np.where(avail, 200, 0)
    rates = np.array([0.18, 0.20, 0.22])
    y = rng.binomial(n, rates) * avail
    return BatchDataset(
        n=n, y=y, avail=avail, arm_labels=("a1", "a2", "a3"),
        truth=np.where(avail, rates, np.nan),
    )


@pytest.fixture
def two_arm_dataset():
    rng = np.random.default_rng(7)
    t, a = 20, 2
    n = np.full((t, a), 400)
    y = rng.binomial(n, [0.2, 0.21])
    return BatchDataset(
        n=n, y=y, avail=np.ones((t, a), dtype=bool), arm_labels=("a1", "a2")
    )
