"""Model specifications and hyperparameter resolution."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logit

from ..core import BatchDataset

MODEL_KINDS = ("IBB", "Logistic", "BB-GLM", "BB-Drift", "BB-Coint")


class UnresolvedHyperError(ValueError):
    """A required hyperparameter has not been resolved yet."""


@dataclass(frozen=True)
class BetaMS:
    """Beta distribution parameterized by mean and sample size."""

    mu: float
    eta: float

    def __post_init__(self):
        if not (0.0 < self.mu < 1.0) or self.eta <= 0:
            raise ValueError(f"invalid Beta mean/size: mu={self.mu}, eta={self.eta}")

    @property
    def alpha(self) -> float:
        return self.mu * self.eta

    @property
    def beta(self) -> float:
        return (1.0 - self.mu) * self.eta


@dataclass(frozen=True)
class ModelSpec:
    """A model kind plus its hyperparameters.

    Unset entries (None) must be resolved with :func:`resolve_spec` before a
    target can be built:

    - ``mu0``: prior mean on the logit scale; empirical-Bayes estimate from
      the pooled cumulative rate when unset.
    - ``lambda0``: prior mean of the shared dispersion level; solved so the
      day-one prior-predictive rate has a 90% CI width of 0.8.
    - ``rho0``: daily walk step prior scale; solved so a one-day step moves
      the rate by at most ``delta`` with 90% probability.
    """

    kind: str
    # IBB
    priors: tuple[BetaMS, ...] | None = None
    # Logistic family
    mu0: float | None = None
    nu: float = 5.0
    # BB-GLM family
    lambda0: float | None = None
    nu0: float | None = None
    invnu_scale: float = 0.1
    # BB-Drift / BB-Coint
    rho0: float | None = None
    delta: float = 0.005
    # BB-Coint
    phi_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind: {self.kind}")

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "IBB" and self.priors is not None:
            out["priors"] = [[p.mu, p.eta] for p in self.priors]
        if self.kind != "IBB":
            out["mu0"] = self.mu0
            out["nu"] = self.nu
        if self.kind in ("BB-GLM", "BB-Drift", "BB-Coint"):
            out.update(
                lambda0=self.lambda0, nu0=self.nu0, invnu_scale=self.invnu_scale
            )
        if self.kind in ("BB-Drift", "BB-Coint"):
            out.update(rho0=self.rho0, delta=self.delta)
        if self.kind == "BB-Coint":
            out["phi_scale"] = self.phi_scale
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ModelSpec":
        obj = dict(obj)
        priors = obj.pop("priors", None)
        if priors is not None:
            priors = tuple(BetaMS(mu, eta) for mu, eta in priors)
        return cls(priors=priors, **obj)


def default_spec(kind: str, num_arms: int | None = None, **overrides) -> ModelSpec:
    """Standard uninformative hyperparameters for a model kind."""
    if kind == "IBB":
        priors = None
        if num_arms is not None:
            priors = tuple(BetaMS(0.5, 2.0) for _ in range(num_arms))
        return ModelSpec(kind="IBB", priors=priors, **overrides)
    return ModelSpec(kind=kind, **overrides)


def empirical_logit_rate(d: BatchDataset) -> float:
    """Logit of the pooled cumulative response rate (empirical Bayes prior mean)."""
    total_n = int(d.n.sum())
    total_y = int(d.y.sum())
    if total_n == 0:
        return 0.0
    # Jeffreys-style continuity guard for all-0 / all-1 data.
    rate = (total_y + 0.5) / (total_n + 1.0)
    return float(logit(rate))


def resolve_spec(spec: ModelSpec, d: BatchDataset) -> ModelSpec:
    """Fill unset hyperparameters from the dataset and solving procedures."""
    from .hyper import solve_lambda0, solve_rho0

    a = d.num_arms
    updates: dict = {}
    if spec.kind == "IBB":
        if spec.priors is None:
            updates["priors"] = tuple(BetaMS(0.5, 2.0) for _ in range(a))
        elif len(spec.priors) != a:
            raise ValueError("IBB needs one prior per arm")
        return replace(spec, **updates) if updates else spec
    if spec.mu0 is None:
        updates["mu0"] = empirical_logit_rate(d)
    if spec.kind in ("BB-GLM", "BB-Drift", "BB-Coint"):
        if spec.nu0 is None:
            updates["nu0"] = 7.0 * a
        if spec.lambda0 is None:
            updates["lambda0"] = solve_lambda0(a)
    if spec.kind in ("BB-Drift", "BB-Coint") and spec.rho0 is None:
        updates["rho0"] = solve_rho0(spec.delta)
    return replace(spec, **updates) if updates else spec


def require_resolved(spec: ModelSpec, d: BatchDataset) -> None:
    if spec.kind == "IBB":
        if spec.priors is None or len(spec.priors) != d.num_arms:
            raise UnresolvedHyperError("IBB priors unset or wrong arity")
        return
    if spec.mu0 is None:
        raise UnresolvedHyperError("mu0 unset; call resolve_spec")
    if spec.kind in ("BB-GLM", "BB-Drift", "BB-Coint"):
        if spec.lambda0 is None or spec.nu0 is None:
            raise UnresolvedHyperError("lambda0/nu0 unset; call resolve_spec")
        if not np.isclose(spec.nu0, 7.0 * d.num_arms):
            raise UnresolvedHyperError(
                f"nu0 must be 7 x arm count ({7 * d.num_arms}), got {spec.nu0}"
            )
    if spec.kind in ("BB-Drift", "BB-Coint") and spec.rho0 is None:
        raise UnresolvedHyperError("rho0 unset; call resolve_spec")
