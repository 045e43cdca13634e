"""Core domain types: daily batch datasets and empirical response rates.

A dataset is a T x A grid of daily sample sizes and response counts, with a
boolean availability mask supporting arm addition mid-experiment. Simulated
datasets may carry hidden true rates for evaluation; models never see them.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "BatchDataset",
    "EmpiricalRates",
    "Violation",
    "validate_dataset",
    "empirical_rates",
    "save_dataset",
    "load_dataset",
]


@dataclass(frozen=True)
class Violation:
    """One dataset invariant breach, located at (day, arm)."""

    day: int
    arm: int
    rule: str


@dataclass(frozen=True)
class BatchDataset:
    """Daily batch data for an A-armed experiment over T days.

    Days are 0-based internally; reports and file formats use 1-based days.
    ``truth`` holds simulator ground-truth rates and is exposed only through
    :meth:`true_rates` so that model-fitting code paths never touch it by
    accident.
    """

    n: np.ndarray  # T x A int, daily sample sizes
    y: np.ndarray  # T x A int, daily response counts
    avail: np.ndarray  # T x A bool
    arm_labels: tuple[str, ...] = ()
    truth: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        n = np.asarray(self.n, dtype=np.int64)
        y = np.asarray(self.y, dtype=np.int64)
        avail = np.asarray(self.avail, dtype=bool)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "avail", avail)
        if n.ndim != 2 or y.shape != n.shape or avail.shape != n.shape:
            raise ValueError("n, y, avail must all be T x A with identical shapes")
        if not self.arm_labels:
            labels = tuple(f"a{k + 1}" for k in range(n.shape[1]))
            object.__setattr__(self, "arm_labels", labels)
        if len(self.arm_labels) != n.shape[1]:
            raise ValueError("arm_labels length must equal arm count")
        if self.truth is not None:
            truth = np.asarray(self.truth, dtype=float)
            if truth.shape != n.shape:
                raise ValueError("truth must be T x A")
            object.__setattr__(self, "truth", truth)
        self.n.setflags(write=False)
        self.y.setflags(write=False)
        self.avail.setflags(write=False)
        if self.truth is not None:
            self.truth.setflags(write=False)

    @property
    def num_days(self) -> int:
        return self.n.shape[0]

    @property
    def num_arms(self) -> int:
        return self.n.shape[1]

    def true_rates(self) -> np.ndarray:
        """Evaluation-only accessor for simulator ground truth."""
        if self.truth is None:
            raise ValueError("dataset carries no ground-truth rates")
        return self.truth

    def first_available_day(self, arm: int) -> int:
        days = np.nonzero(self.avail[:, arm])[0]
        if days.size == 0:
            raise ValueError(f"arm {arm} is never available")
        return int(days[0])

    def through_day(self, day: int) -> "BatchDataset":
        """Prefix of the dataset covering days 0..day inclusive."""
        return BatchDataset(
            n=self.n[: day + 1],
            y=self.y[: day + 1],
            avail=self.avail[: day + 1],
            arm_labels=self.arm_labels,
            truth=None if self.truth is None else self.truth[: day + 1],
        )


@dataclass(frozen=True)
class EmpiricalRates:
    """Daily and running-cumulative observed response rates.

    Entries where no data exists (N = 0) are flagged in ``defined`` rather than
    encoded as 0 or NaN-in-band; coverage checks must skip them.
    """

    daily: np.ndarray  # T x A float, NaN where undefined
    cumulative: np.ndarray  # T x A float, NaN until first data
    defined: np.ndarray  # T x A bool, True where daily rate exists


def validate_dataset(d: BatchDataset) -> list[Violation]:
    """Check all dataset invariants; returns findings instead of raising."""
    out: list[Violation] = []
    t_idx, a_idx = np.nonzero((d.y < 0) | (d.n < 0))
    for t, a in zip(t_idx, a_idx):
        out.append(Violation(int(t), int(a), "negative count"))
    t_idx, a_idx = np.nonzero(d.y > d.n)
    for t, a in zip(t_idx, a_idx):
        out.append(Violation(int(t), int(a), "Y>N"))
    t_idx, a_idx = np.nonzero(~d.avail & (d.n > 0))
    for t, a in zip(t_idx, a_idx):
        out.append(Violation(int(t), int(a), "unavailable arm has traffic"))
    # Arms are added, never resurrected: availability must be contiguous
    # from each arm's first available day onward.
    for a in range(d.num_arms):
        col = d.avail[:, a]
        if not col.any():
            continue
        first = int(np.argmax(col))
        gaps = np.nonzero(~col[first:])[0]
        for g in gaps:
            out.append(Violation(first + int(g), a, "availability gap"))
    if d.truth is not None:
        t_idx, a_idx = np.nonzero((d.truth <= 0) | (d.truth >= 1))
        for t, a in zip(t_idx, a_idx):
            out.append(Violation(int(t), int(a), "true rate outside (0,1)"))
    return out


def empirical_rates(d: BatchDataset) -> EmpiricalRates:
    """Daily Y/N and per-arm running cumulative rates."""
    n = d.n.astype(float)
    y = d.y.astype(float)
    defined = d.n > 0
    daily = np.full(n.shape, np.nan)
    np.divide(y, n, out=daily, where=defined)
    cum_n = np.cumsum(n, axis=0)
    cum_y = np.cumsum(y, axis=0)
    cumulative = np.full(n.shape, np.nan)
    np.divide(cum_y, cum_n, out=cumulative, where=cum_n > 0)
    return EmpiricalRates(daily=daily, cumulative=cumulative, defined=defined)


# ---------------------------------------------------------------------------
# File format: CSV (day,arm,n,y,available,true_rate) + JSON sidecar
# ---------------------------------------------------------------------------

CSV_HEADER = ["day", "arm", "n", "y", "available", "true_rate"]


def save_dataset(d: BatchDataset, csv_path, sidecar: dict | None = None) -> None:
    """Write the dataset CSV and, when given, a JSON generator sidecar.

    Days are written 1-based. true_rate uses repr-precision floats so the
    round trip is bit exact; blank when unknown.
    """
    csv_path = Path(csv_path)
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER)
        for t in range(d.num_days):
            for a in range(d.num_arms):
                tr = ""
                if d.truth is not None and np.isfinite(d.truth[t, a]):
                    tr = repr(float(d.truth[t, a]))
                w.writerow(
                    [
                        t + 1,
                        d.arm_labels[a],
                        int(d.n[t, a]),
                        int(d.y[t, a]),
                        "true" if d.avail[t, a] else "false",
                        tr,
                    ]
                )
    if sidecar is not None:
        with open(csv_path.with_suffix(".json"), "w") as f:
            json.dump(sidecar, f, indent=2, sort_keys=True)
            f.write("\n")


def load_dataset(csv_path) -> BatchDataset:
    """Read a dataset CSV written by :func:`save_dataset`."""
    rows = []
    with open(csv_path, newline="") as f:
        r = csv.reader(f)
        header = next(r)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header: {header}")
        rows = list(r)
    if not rows:
        raise ValueError("empty dataset CSV")
    labels: list[str] = []
    for _, arm, *_ in rows:
        if arm not in labels:
            labels.append(arm)
    arm_index = {lab: k for k, lab in enumerate(labels)}
    num_days = max(int(row[0]) for row in rows)
    num_arms = len(labels)
    n = np.zeros((num_days, num_arms), dtype=np.int64)
    y = np.zeros((num_days, num_arms), dtype=np.int64)
    avail = np.zeros((num_days, num_arms), dtype=bool)
    truth = np.full((num_days, num_arms), np.nan)
    any_truth = False
    for day, arm, nv, yv, av, tr in rows:
        t, a = int(day) - 1, arm_index[arm]
        n[t, a] = int(nv)
        y[t, a] = int(yv)
        avail[t, a] = av == "true"
        if tr != "":
            truth[t, a] = float(tr)
            any_truth = True
    return BatchDataset(
        n=n,
        y=y,
        avail=avail,
        arm_labels=tuple(labels),
        truth=truth if any_truth else None,
    )
