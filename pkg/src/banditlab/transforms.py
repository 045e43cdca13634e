"""Bijective parameter transforms between constrained and unconstrained space.

Each transform maps an unconstrained real to its constrained domain
(``constrain``) and back (``unconstrain``), and reports the log absolute
Jacobian of ``constrain`` for accumulating transformed densities.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, logit

__all__ = ["constrain", "unconstrain", "log_jacobian", "KINDS"]

KINDS = ("logit-interval", "log-positive", "identity")


class DomainError(ValueError):
    """Value outside the transform's constrained domain."""


def constrain(kind: str, value):
    """Map unconstrained real(s) into the constrained domain."""
    value = np.asarray(value, dtype=float)
    if kind == "logit-interval":
        return expit(value)
    if kind == "log-positive":
        return np.exp(value)
    if kind == "identity":
        return value
    raise ValueError(f"unknown transform kind: {kind}")


def unconstrain(kind: str, value):
    """Inverse of :func:`constrain`; raises DomainError off-domain."""
    value = np.asarray(value, dtype=float)
    if kind == "logit-interval":
        if np.any(value <= 0) or np.any(value >= 1):
            raise DomainError("logit-interval expects values in (0,1)")
        return logit(value)
    if kind == "log-positive":
        if np.any(value <= 0):
            raise DomainError("log-positive expects values in (0,inf)")
        return np.log(value)
    if kind == "identity":
        return value
    raise ValueError(f"unknown transform kind: {kind}")


def log_jacobian(kind: str, unconstrained):
    """log |d constrain(z) / dz| evaluated at unconstrained z."""
    z = np.asarray(unconstrained, dtype=float)
    if kind == "logit-interval":
        # d/dz expit(z) = expit(z) (1 - expit(z))
        return -np.logaddexp(0.0, z) - np.logaddexp(0.0, -z)
    if kind == "log-positive":
        return z
    if kind == "identity":
        return np.zeros_like(z)
    raise ValueError(f"unknown transform kind: {kind}")
