"""Thompson-sampling agent built on posterior fits.

The agent turns a fitted value model into daily traffic weights (the
probability each arm is best under the posterior, mixed with a uniform
exploration floor) and a stopping rule that declares a winner once one arm
is a sufficiently clear best.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .models.fit import PosteriorFit

__all__ = [
    "NoAvailableArms",
    "PolicyWeights",
    "StopRule",
    "StopDecision",
    "prob_best",
    "apply_floor",
    "stopping_decision",
    "agent_step",
]


class NoAvailableArms(ValueError):
    """Every arm is masked out."""


@dataclass(frozen=True)
class PolicyWeights:
    """Daily routing proportions: a point on the simplex with zero weight on
    unavailable arms."""

    w: np.ndarray
    available: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        avail = np.asarray(self.available, dtype=bool)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "available", avail)
        if w.shape != avail.shape:
            raise ValueError("weights and mask shapes differ")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must lie on the simplex")
        if np.any(w[~avail] != 0):
            raise ValueError("positive weight on unavailable arm")


@dataclass(frozen=True)
class StopRule:
    """Stop once max win-probability reaches ``threshold``, never on or
    before day ``min_days``; ``exploration_floor`` mixes uniform traffic in."""

    threshold: float = 0.95
    min_days: int = 0
    exploration_floor: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0,1)")
        if self.min_days < 0:
            raise ValueError("min_days must be >= 0")
        if not 0.0 <= self.exploration_floor < 1.0:
            raise ValueError("exploration_floor must be in [0,1)")

    def to_json(self) -> str:
        return json.dumps(
            {
                "threshold": self.threshold,
                "min_days": self.min_days,
                "floor": self.exploration_floor,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "StopRule":
        obj = json.loads(text)
        return cls(
            threshold=obj["threshold"],
            min_days=obj["min_days"],
            exploration_floor=obj.get("floor", 0.0),
        )


@dataclass(frozen=True)
class StopDecision:
    stopped: bool
    winner: int | None
    day: int | None
    prob_best_at_stop: np.ndarray


def prob_best(theta_draws: np.ndarray, available: np.ndarray | None = None) -> np.ndarray:
    """Posterior probability each available arm has the highest rate.

    ``theta_draws`` is draws x arms. Ties within a draw go to the lowest arm
    index; unavailable arms get probability zero.
    """
    draws = np.asarray(theta_draws, dtype=float)
    if draws.ndim != 2 or draws.shape[0] < 1:
        raise ValueError("theta_draws must be S x A with S >= 1")
    s, a = draws.shape
    if available is None:
        available = np.ones(a, dtype=bool)
    available = np.asarray(available, dtype=bool)
    if not available.any():
        raise NoAvailableArms("no available arms")
    masked = np.where(available[None, :], draws, -np.inf)
    winners = np.argmax(masked, axis=1)  # lowest index wins ties
    return np.bincount(winners, minlength=a) / s


def apply_floor(w: PolicyWeights, eps: float) -> PolicyWeights:
    """Mix the weights with uniform-over-available: (1-eps) w + eps u."""
    if not 0.0 <= eps < 1.0:
        raise ValueError("floor must be in [0,1)")
    avail = w.available
    uniform = avail / avail.sum()
    return PolicyWeights(w=(1.0 - eps) * w.w + eps * uniform, available=avail)


def stopping_decision(prob_best_vec: np.ndarray, day: int, rule: StopRule) -> StopDecision:
    """Evaluate the stop rule after ``day`` full days of data."""
    probs = np.asarray(prob_best_vec, dtype=float)
    if probs.size >= 2 and rule.threshold <= 1.0 / probs.size:
        warnings.warn("threshold <= 1/A never separates arms", stacklevel=2)
    winner = int(np.argmax(probs))
    if day > rule.min_days and probs[winner] >= rule.threshold:
        return StopDecision(stopped=True, winner=winner, day=day, prob_best_at_stop=probs)
    return StopDecision(stopped=False, winner=None, day=None, prob_best_at_stop=probs)


def agent_step(
    fit: PosteriorFit,
    day: int,
    rule: StopRule,
    available: np.ndarray | None = None,
) -> tuple[PolicyWeights, StopDecision]:
    """One allocation decision from a fit on data through ``day`` (1-based).

    Returns the traffic weights for the next day and the stop decision.
    After a stop the weights are a point mass on the winner (rollout); the
    exploration floor applies only before stopping.
    """
    if available is None:
        available = np.asarray(fit.avail, dtype=bool).any(axis=0)
    probs = prob_best(fit.theta_final, available)
    decision = stopping_decision(probs, day, rule)
    if decision.stopped:
        w = np.zeros_like(probs)
        w[decision.winner] = 1.0
        return PolicyWeights(w=w, available=available), decision
    weights = apply_floor(
        PolicyWeights(w=probs, available=available), rule.exploration_floor
    )
    return weights, decision
