"""Posterior-predictive checks: daily-rate coverage and lag-1 autocorrelation.

Both checks compare the observed daily empirical rates against replicated
rates drawn from the fitted model's posterior predictive. Coverage asks
whether the right fraction of days lands inside central width-W intervals;
the AC check asks whether the model reproduces the series' serial
dependence.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .core import EmpiricalRates

__all__ = [
    "DegeneratePP",
    "ConstantSeries",
    "ArmCoverage",
    "CoverageReport",
    "ArmAC",
    "ACReport",
    "coverage_check",
    "lag1_ac",
    "ac_ppc",
    "write_coverage_csv",
]


class DegeneratePP(ValueError):
    """Posterior-predictive draws are identical; intervals are points."""


class ConstantSeries(ValueError):
    """Lag-1 autocorrelation is undefined for a constant series."""


@dataclass(frozen=True)
class ArmCoverage:
    coverage: float
    covered: np.ndarray  # per-day indicator, NaN-skipped days excluded
    days: np.ndarray  # 1-based days entering the check
    lo: np.ndarray
    hi: np.ndarray
    p_value: float


@dataclass(frozen=True)
class CoverageReport:
    width: float
    arms: tuple[ArmCoverage, ...]

    def p_values(self) -> np.ndarray:
        return np.array([a.p_value for a in self.arms])

    def to_json(self) -> str:
        return json.dumps(
            {
                "width": self.width,
                "note": "binomial p-value assumes independent per-day indicators",
                "arms": [
                    {
                        "coverage": a.coverage,
                        "n_days": int(a.days.size),
                        "p_value": a.p_value,
                    }
                    for a in self.arms
                ],
            }
        )


@dataclass(frozen=True)
class ArmAC:
    empirical_ac: float
    pp_ac_mean: float
    pp_ac_lo: float
    pp_ac_hi: float
    p_value: float


@dataclass(frozen=True)
class ACReport:
    arms: tuple[ArmAC, ...]

    def p_values(self) -> np.ndarray:
        return np.array([a.p_value for a in self.arms])

    def to_json(self) -> str:
        return json.dumps(
            {
                "arms": [
                    {
                        "empirical_ac": a.empirical_ac,
                        "pp_ac_mean": a.pp_ac_mean,
                        "pp_ac_90ci": [a.pp_ac_lo, a.pp_ac_hi],
                        "p_value": a.p_value,
                    }
                    for a in self.arms
                ]
            }
        )


def _binom_two_sided(k: int, n: int, p: float) -> float:
    """Doubled smaller exact tail, observed count included, capped at 1."""
    lower = float(binom.cdf(k, n, p))
    upper = float(binom.sf(k - 1, n, p))
    return min(1.0, 2.0 * min(lower, upper))


def coverage_check(
    pp: np.ndarray, emp: EmpiricalRates, width: float = 0.8
) -> CoverageReport:
    """Coverage of empirical daily rates by central width-W PP intervals.

    ``pp`` is S x T x A posterior-predictive daily rates (NaN where a day
    has no traffic). Days with undefined empirical rate are skipped. The
    p-value is the exact two-sided Binomial(n_days, W) tail of the covered
    count.
    """
    pp = np.asarray(pp, dtype=float)
    if pp.ndim != 3:
        raise ValueError("pp must be S x T x A")
    if not 0.0 < width < 1.0:
        raise ValueError("width must be in (0,1)")
    s, t, a = pp.shape
    if emp.daily.shape != (t, a):
        raise ValueError("pp and empirical shapes differ")
    alpha = (1.0 - width) / 2.0
    arms = []
    for j in range(a):
        days, lo, hi, cov = [], [], [], []
        for i in range(t):
            if not emp.defined[i, j]:
                continue
            draws = pp[:, i, j]
            draws = draws[~np.isnan(draws)]
            if draws.size == 0:
                continue
            if np.ptp(draws) == 0.0:
                raise DegeneratePP(f"arm {j} day {i + 1}: PP draws are constant")
            # outward-rounded order statistics: daily counts put the PP
            # draws on a discrete grid, and interpolating between atoms
            # yields intervals with less than the nominal mass; bounds
            # count as covered
            lo_q = np.quantile(draws, alpha, method="lower")
            hi_q = np.quantile(draws, 1.0 - alpha, method="higher")
            days.append(i + 1)
            lo.append(lo_q)
            hi.append(hi_q)
            cov.append(lo_q <= emp.daily[i, j] <= hi_q)
        covered = np.asarray(cov, dtype=bool)
        n_days = covered.size
        if n_days == 0:
            raise ValueError(f"arm {j}: no defined days to check")
        p = _binom_two_sided(int(covered.sum()), n_days, width)
        arms.append(
            ArmCoverage(
                coverage=float(covered.mean()),
                covered=covered,
                days=np.asarray(days),
                lo=np.asarray(lo),
                hi=np.asarray(hi),
                p_value=p,
            )
        )
    return CoverageReport(width=width, arms=tuple(arms))


def lag1_ac(series: np.ndarray) -> float:
    """r1 = sum (x_t - xbar)(x_{t+1} - xbar) / sum (x_t - xbar)^2."""
    x = np.asarray(series, dtype=float)
    if x.size < 3:
        raise ValueError("series must have length >= 3")
    centered = x - x.mean()
    denom = float(np.sum(centered**2))
    if denom == 0.0:
        raise ConstantSeries("lag-1 AC undefined for constant series")
    return float(np.sum(centered[:-1] * centered[1:]) / denom)


def ac_ppc(
    pp: np.ndarray, emp: EmpiricalRates, alternative: str = "two-sided"
) -> ACReport:
    """Lag-1 AC posterior-predictive p-values per arm.

    The per-arm series are restricted to days with defined empirical rates;
    PP replicate series use the same days. Tail fractions use the add-one
    estimator (#{tail} + 1) / (S + 1), counting the observed series as one
    replicate, so p-values are never exactly zero. With
    ``alternative="two-sided"`` (default) p = 2 min(tail_ge, tail_le),
    capped at 1; with ``alternative="greater"`` p = tail_ge, small only
    when the empirical series is more autocorrelated than the replicates.
    Replicates with constant series are dropped.
    """
    if alternative not in ("two-sided", "greater"):
        raise ValueError("alternative must be 'two-sided' or 'greater'")
    pp = np.asarray(pp, dtype=float)
    s, t, a = pp.shape
    arms = []
    for j in range(a):
        mask = emp.defined[:, j]
        if mask.sum() < 3:
            raise ValueError(f"arm {j}: need >= 3 defined days")
        emp_ac = lag1_ac(emp.daily[mask, j])
        reps = pp[:, mask, j]
        acs = []
        for r in reps:
            r = r[~np.isnan(r)]
            if r.size < 3 or np.ptp(r) == 0.0:
                continue
            acs.append(lag1_ac(r))
        if not acs:
            raise DegeneratePP(f"arm {j}: no usable PP replicates")
        acs = np.asarray(acs)
        ge = (float(np.sum(acs >= emp_ac)) + 1.0) / (acs.size + 1.0)
        le = (float(np.sum(acs <= emp_ac)) + 1.0) / (acs.size + 1.0)
        lo, hi = np.quantile(acs, [0.05, 0.95])
        if alternative == "greater":
            p = ge
        else:
            p = min(1.0, 2.0 * min(ge, le))
        arms.append(
            ArmAC(
                empirical_ac=emp_ac,
                pp_ac_mean=float(acs.mean()),
                pp_ac_lo=float(lo),
                pp_ac_hi=float(hi),
                p_value=p,
            )
        )
    return ACReport(arms=tuple(arms))


def write_coverage_csv(path, arm: ArmCoverage, emp: EmpiricalRates, arm_index: int):
    """Per-day coverage-plot rows for one arm: day,lo,hi,empirical,covered."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["day", "lo", "hi", "empirical", "covered"])
        for k, day in enumerate(arm.days):
            w.writerow(
                [
                    int(day),
                    repr(float(arm.lo[k])),
                    repr(float(arm.hi[k])),
                    repr(float(emp.daily[day - 1, arm_index])),
                    "true" if arm.covered[k] else "false",
                ]
            )
