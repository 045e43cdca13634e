"""Convergence diagnostics for chain sets: split R-hat and autocorrelation ESS."""

from __future__ import annotations

import numpy as np

__all__ = ["rhat", "ess", "TooFewDrawsError"]


class TooFewDrawsError(ValueError):
    """Diagnostics need at least 2 chains and 4 draws per chain."""


def _check(chains):
    if chains.num_chains < 2 or chains.num_draws < 4:
        raise TooFewDrawsError(
            f"need >= 2 chains and >= 4 draws, got {chains.num_chains} x {chains.num_draws}"
        )


def _split(draws: np.ndarray) -> np.ndarray:
    """Split each chain in half, doubling the chain count."""
    c, s, d = draws.shape
    half = s // 2
    return np.concatenate([draws[:, :half], draws[:, half : 2 * half]], axis=0)


def rhat(chains) -> np.ndarray:
    """Split-chain potential scale reduction per dimension.

    Dimensions with zero within-chain variance are reported as NaN
    (undefined) rather than 1.
    """
    _check(chains)
    x = _split(chains.draws)
    m, n, dim = x.shape
    chain_means = x.mean(axis=1)
    chain_vars = x.var(axis=1, ddof=1)
    w = chain_vars.mean(axis=0)
    b = n * chain_means.var(axis=0, ddof=1)
    var_plus = (n - 1) / n * w + b / n
    out = np.full(dim, np.nan)
    # exact constancy check: np.var of a constant array can round to ~1e-32
    constant = np.ptp(x.reshape(-1, dim), axis=0) == 0
    ok = (w > 0) & ~constant
    out[ok] = np.sqrt(var_plus[ok] / w[ok])
    return out


def _autocov(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of each row series via FFT; rows are chains."""
    n = x.shape[1]
    xc = x - x.mean(axis=1, keepdims=True)
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(xc, size, axis=1)
    acov = np.fft.irfft(f * np.conj(f), size, axis=1)[:, :n].real
    return acov / n


def ess(chains) -> np.ndarray:
    """Effective sample size per dimension (Geyer initial monotone sequence).

    Constant dimensions are reported as NaN.
    """
    _check(chains)
    x = _split(chains.draws)
    m, n, dim = x.shape
    out = np.full(dim, np.nan)
    for k in range(dim):
        series = x[:, :, k]
        if np.ptp(series) == 0:
            continue
        acov = _autocov(series)
        chain_var = acov[:, 0] * n / (n - 1)
        w = chain_var.mean()
        if w <= 0:
            continue
        b = n * series.mean(axis=1).var(ddof=1) if m > 1 else 0.0
        var_plus = (n - 1) / n * w + b / n
        rho = 1.0 - (w - acov.mean(axis=0)) / var_plus
        rho[0] = 1.0
        # Geyer pairs: keep while positive, enforce monotone non-increase.
        max_pairs = (n - 1) // 2
        tau_sum = 0.0
        prev = np.inf
        for p in range(max_pairs):
            pair = rho[2 * p] + rho[2 * p + 1]
            if pair <= 0:
                break
            pair = min(pair, prev)
            tau_sum += pair
            prev = pair
        tau = max(-1.0 + 2.0 * tau_sum, 1.0 / np.log10(m * n + 10))
        out[k] = min(m * n / tau, float(m * n))
    return out
