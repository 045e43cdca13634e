"""Shared likelihood/prior pieces with analytic gradients.

The overdispersed models marginalize the daily latent rates analytically,
leaving a Beta-Binomial likelihood per (day, arm) cell; gradients flow to the
cell rate and the per-arm dispersion size via digamma terms.
"""

from __future__ import annotations

import numpy as np
from scipy.special import digamma, gammaln

__all__ = [
    "betabinom_loglik",
    "betabinom_loglik_grads",
    "beta_ms_logpdf",
    "beta_ms_logpdf_grads",
]

# Above this the direct gammaln/digamma differences lose enough mantissa
# that the log likelihood becomes a staircase in eta; switch to Stirling.
_BIG = 1e6


def _gammaln_diff(x, k):
    """gammaln(x + k) - gammaln(x), stable for huge x."""
    x = np.asarray(x, float)
    k = np.asarray(k, float)
    small = np.minimum(x, _BIG)  # keep gammaln args sane in the dead branch
    direct = gammaln(small + k) - gammaln(small)
    r = k / x
    stirling = k * np.log(x) + (x + k - 0.5) * np.log1p(r) - k
    return np.where(x > _BIG, stirling, direct)


def _digamma_diff(x, k):
    """digamma(x + k) - digamma(x), stable for huge x."""
    x = np.asarray(x, float)
    k = np.asarray(k, float)
    small = np.minimum(x, _BIG)
    direct = digamma(small + k) - digamma(small)
    stirling = np.log1p(k / x) + k / (2.0 * x * (x + k))
    return np.where(x > _BIG, stirling, direct)


def betabinom_loglik(y, n, theta, eta):
    """Sum of Beta-Binomial(n; mean theta, size eta) log pmfs (elementwise args)."""
    y = np.asarray(y, float)
    n = np.asarray(n, float)
    a = theta * eta
    b = (1.0 - theta) * eta
    ll = (
        gammaln(n + 1) - gammaln(y + 1) - gammaln(n - y + 1)
        + _gammaln_diff(a, y) + _gammaln_diff(b, n - y) - _gammaln_diff(eta, n)
    )
    return float(np.sum(ll))


def betabinom_loglik_grads(y, n, theta, eta):
    """(loglik, d/dtheta, d/deta) per cell for the Beta-Binomial marginal."""
    y = np.asarray(y, float)
    n = np.asarray(n, float)
    a = theta * eta
    b = (1.0 - theta) * eta
    ll = (
        gammaln(n + 1) - gammaln(y + 1) - gammaln(n - y + 1)
        + _gammaln_diff(a, y) + _gammaln_diff(b, n - y) - _gammaln_diff(eta, n)
    )
    da = _digamma_diff(a, y)
    db = _digamma_diff(b, n - y)
    dtheta = eta * (da - db)
    deta = theta * da + (1.0 - theta) * db - _digamma_diff(eta, n)
    return ll, dtheta, deta


def beta_ms_logpdf(x, mean, size):
    a = mean * size
    b = (1.0 - mean) * size
    return (
        (a - 1.0) * np.log(x)
        + (b - 1.0) * np.log1p(-x)
        + gammaln(size) - gammaln(a) - gammaln(b)
    )


def beta_ms_logpdf_grads(x, mean, size):
    """(logpdf, d/dx, d/dmean, d/dsize) for Beta in mean/size form."""
    a = mean * size
    b = (1.0 - mean) * size
    lx = np.log(x)
    l1x = np.log1p(-x)
    lp = (a - 1.0) * lx + (b - 1.0) * l1x + gammaln(size) - gammaln(a) - gammaln(b)
    dx = (a - 1.0) / x - (b - 1.0) / (1.0 - x)
    dmean = size * (lx - l1x - digamma(a) + digamma(b))
    dsize = (
        mean * lx + (1.0 - mean) * l1x
        + digamma(size) - mean * digamma(a) - (1.0 - mean) * digamma(b)
    )
    return lp, dx, dmean, dsize
