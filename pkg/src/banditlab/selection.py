"""Test-to-complicate model selection.

Candidate models are tried from simplest to most flexible; the first one
whose posterior-predictive checks clear the p-value gate on every arm is
chosen. A fit failure counts as a failed check and the ladder moves on.

Each arm is one test cell. Its p-value Bonferroni-combines two
diagnostics, p_cell = min(1, 2 min(p_coverage, p_ac)): the interval
coverage check and a one-sided (upper tail) lag-1 autocorrelation check.
Coverage alone cannot separate a drifting process from mere
overdispersion — an iid model can inflate its dispersion until the daily
intervals are wide enough, while the day-to-day persistence of its
replicates stays near zero — so the AC component is what forces the
ladder past BB-GLM on trending data. It is one-sided because data that
are *less* autocorrelated than the replicates are not evidence for a more
flexible model; only excess persistence counts against a candidate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import BatchDataset, empirical_rates
from .models import ConvergenceFailure, default_spec, fit, pp_rate_draws
from .ppc import ac_ppc, coverage_check
from .sampler import SamplerConfig

__all__ = ["LADDER", "SelectionResult", "test_to_complicate"]

LADDER = ("Logistic", "BB-GLM", "BB-Coint")


@dataclass(frozen=True)
class SelectionResult:
    chosen: str | None
    p_values: dict  # kind -> per-arm combined cell p-values, None on fit failure
    coverage_p_values: dict  # kind -> per-arm coverage p-values, None on failure
    ac_p_values: dict  # kind -> per-arm upper-tail lag-1 AC p-values, None on failure
    fits: dict  # kind -> PosteriorFit for audit (fit failures absent)
    threshold: float
    width: float

    def to_json(self) -> str:
        def as_lists(d: dict) -> dict:
            return {
                k: (list(map(float, v)) if v is not None else None)
                for k, v in d.items()
            }

        return json.dumps(
            {
                "chosen": self.chosen,
                "threshold": self.threshold,
                "width": self.width,
                "p_values": as_lists(self.p_values),
                "coverage_p_values": as_lists(self.coverage_p_values),
                "ac_p_values": as_lists(self.ac_p_values),
            }
        )


def test_to_complicate(
    d: BatchDataset,
    threshold: float = 0.1,
    width: float = 0.8,
    seed: int = 0,
    sampler_cfg: SamplerConfig | None = None,
) -> SelectionResult:
    """Return the first ladder model whose per-arm combined cell p-values
    (Bonferroni over the coverage and upper-tail AC checks) all clear
    ``threshold``; ``chosen`` is None when none qualifies."""
    emp = empirical_rates(d)
    p_values: dict = {}
    coverage_p_values: dict = {}
    ac_p_values: dict = {}
    fits: dict = {}
    chosen = None
    for kind in LADDER:
        try:
            f = fit(default_spec(kind, d.num_arms), d, sampler_cfg=sampler_cfg)
            pp = pp_rate_draws(f, d.n, seed=seed)
            cov_report = coverage_check(pp, emp, width)
            ac_report = ac_ppc(pp, emp, alternative="greater")
        except (ConvergenceFailure, ValueError):
            p_values[kind] = None
            coverage_p_values[kind] = None
            ac_p_values[kind] = None
            continue
        cov_pv = cov_report.p_values()
        ac_pv = np.asarray([a.p_value for a in ac_report.arms])
        cells = np.minimum(1.0, 2.0 * np.minimum(cov_pv, ac_pv))
        p_values[kind] = cells
        coverage_p_values[kind] = cov_pv
        ac_p_values[kind] = ac_pv
        fits[kind] = f
        if np.all(cells > threshold):
            chosen = kind
            break
    return SelectionResult(
        chosen=chosen,
        p_values=p_values,
        coverage_p_values=coverage_p_values,
        ac_p_values=ac_p_values,
        fits=fits,
        threshold=threshold,
        width=width,
    )
