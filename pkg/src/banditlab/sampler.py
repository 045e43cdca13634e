"""Gradient-based MCMC engine: No-U-Turn HMC with dual-averaging step-size
adaptation and a diagonal mass matrix, plus a derivative-free simplex
optimizer and a finite-difference gradient checker.

Targets are supplied as log-density-with-gradient callables on unconstrained
space; models own their transforms. Chains are run sequentially with
deterministic per-chain RNG streams so identical (target, cfg, seed) inputs
produce bit-identical draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize as _sciopt

__all__ = [
    "TargetDensity",
    "SamplerConfig",
    "ChainSet",
    "Diagnostics",
    "hmc_sample",
    "grad_check",
    "nelder_mead",
    "NonFiniteError",
    "MaxIterationsError",
]

_DIVERGENCE_SLACK = 1000.0  # log-density drop treated as a divergent trajectory


class NonFiniteError(RuntimeError):
    """Target returned NaN/inf where a finite value was required."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class MaxIterationsError(RuntimeError):
    """Optimizer exhausted its iteration budget before converging."""


@dataclass(frozen=True)
class TargetDensity:
    """Differentiable unnormalized log density on R^dim."""

    dim: int
    eval: Callable[[np.ndarray], tuple[float, np.ndarray]]

    def __call__(self, z: np.ndarray) -> tuple[float, np.ndarray]:
        return self.eval(z)


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 4
    warmup: int = 500
    draws: int = 500
    seed: int = 0
    target_accept: float = 0.8
    max_depth: int = 10
    # Optional warm start: center for initialization jitter and a previously
    # adapted diagonal inverse mass matrix / step size.
    init_point: np.ndarray | None = None
    inv_mass: np.ndarray | None = None
    init_step: float | None = None


@dataclass(frozen=True)
class ChainSet:
    """Post-warmup draws: chains x draws x dim, plus per-chain stats."""

    draws: np.ndarray
    seeds: tuple[int, ...]
    accept_stat: np.ndarray  # mean proposal acceptance per chain
    divergences: int
    step_size: np.ndarray  # adapted step size per chain
    inv_mass: np.ndarray  # chains x dim diagonal inverse mass

    @property
    def num_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def num_draws(self) -> int:
        return self.draws.shape[1]

    @property
    def dim(self) -> int:
        return self.draws.shape[2]

    def flat(self) -> np.ndarray:
        return self.draws.reshape(-1, self.dim)


@dataclass(frozen=True)
class Diagnostics:
    rhat: np.ndarray
    ess: np.ndarray
    divergences: int

    def max_rhat(self) -> float:
        finite = self.rhat[np.isfinite(self.rhat)]
        return float(finite.max()) if finite.size else float("nan")


# ---------------------------------------------------------------------------
# NUTS internals
# ---------------------------------------------------------------------------


def _kinetic(r, inv_mass):
    return 0.5 * float(np.dot(r * inv_mass, r))


def _leapfrog(target, z, r, grad, eps, inv_mass):
    r1 = r + 0.5 * eps * grad
    z1 = z + eps * inv_mass * r1
    logp1, grad1 = target(z1)
    if not np.isfinite(logp1) or not np.all(np.isfinite(grad1)):
        return z1, r1, -np.inf, np.zeros_like(z1)
    r1 = r1 + 0.5 * eps * grad1
    return z1, r1, logp1, grad1


def _find_reasonable_eps(target, z, logp, grad, inv_mass, rng):
    eps = 1.0
    r = rng.standard_normal(z.size) / np.sqrt(inv_mass)
    joint0 = logp - _kinetic(r, inv_mass)
    _, r1, logp1, _ = _leapfrog(target, z, r, grad, eps, inv_mass)
    joint1 = logp1 - _kinetic(r1, inv_mass)
    # Shrink first if the initial step explodes.
    while not np.isfinite(joint1):
        eps *= 0.5
        if eps < 1e-10:
            raise NonFiniteError("cannot find a finite starting step size", z)
        _, r1, logp1, _ = _leapfrog(target, z, r, grad, eps, inv_mass)
        joint1 = logp1 - _kinetic(r1, inv_mass)
    direction = 1.0 if (joint1 - joint0) > np.log(0.5) else -1.0
    while direction * (joint1 - joint0) > -direction * np.log(2.0):
        eps *= 2.0**direction
        if eps > 1e7 or eps < 1e-10:
            break
        _, r1, logp1, _ = _leapfrog(target, z, r, grad, eps, inv_mass)
        joint1 = logp1 - _kinetic(r1, inv_mass)
        if not np.isfinite(joint1):
            joint1 = -np.inf
    return eps


class _Tree:
    __slots__ = (
        "z_minus", "r_minus", "grad_minus",
        "z_plus", "r_plus", "grad_plus",
        "z_prop", "logp_prop", "grad_prop",
        "n", "cont", "alpha", "n_alpha", "divergent",
    )


def _build_tree(target, z, r, grad, log_u, v, j, eps, joint0, inv_mass, rng):
    t = _Tree()
    if j == 0:
        z1, r1, logp1, grad1 = _leapfrog(target, z, r, grad, v * eps, inv_mass)
        joint = logp1 - _kinetic(r1, inv_mass) if np.isfinite(logp1) else -np.inf
        t.z_minus = t.z_plus = t.z_prop = z1
        t.r_minus = t.r_plus = r1
        t.grad_minus = t.grad_plus = t.grad_prop = grad1
        t.logp_prop = logp1
        t.n = 1 if log_u <= joint else 0
        t.divergent = log_u - _DIVERGENCE_SLACK >= joint
        t.cont = not t.divergent
        t.alpha = min(1.0, np.exp(min(0.0, joint - joint0)))
        t.n_alpha = 1
        return t
    t1 = _build_tree(target, z, r, grad, log_u, v, j - 1, eps, joint0, inv_mass, rng)
    if not t1.cont:
        return t1
    if v == -1:
        t2 = _build_tree(
            target, t1.z_minus, t1.r_minus, t1.grad_minus,
            log_u, v, j - 1, eps, joint0, inv_mass, rng,
        )
        t1.z_minus, t1.r_minus, t1.grad_minus = t2.z_minus, t2.r_minus, t2.grad_minus
    else:
        t2 = _build_tree(
            target, t1.z_plus, t1.r_plus, t1.grad_plus,
            log_u, v, j - 1, eps, joint0, inv_mass, rng,
        )
        t1.z_plus, t1.r_plus, t1.grad_plus = t2.z_plus, t2.r_plus, t2.grad_plus
    total = t1.n + t2.n
    if t2.n > 0 and rng.random() < t2.n / total:
        t1.z_prop, t1.logp_prop, t1.grad_prop = t2.z_prop, t2.logp_prop, t2.grad_prop
    span = t1.z_plus - t1.z_minus
    no_uturn = (
        np.dot(span, inv_mass * t1.r_minus) >= 0
        and np.dot(span, inv_mass * t1.r_plus) >= 0
    )
    t1.n = total
    t1.cont = t2.cont and no_uturn
    t1.divergent = t1.divergent or t2.divergent
    t1.alpha += t2.alpha
    t1.n_alpha += t2.n_alpha
    return t1


def _init_point(target, rng, cfg):
    center = (
        np.zeros(target.dim) if cfg.init_point is None else np.asarray(cfg.init_point, float)
    )
    scale = 1.0
    for _ in range(50):
        z = center + scale * rng.standard_normal(target.dim)
        logp, grad = target(z)
        if np.isfinite(logp) and np.all(np.isfinite(grad)):
            return z, logp, grad
        scale *= 0.5
    logp, grad = target(center)
    if np.isfinite(logp) and np.all(np.isfinite(grad)):
        return center, logp, grad
    raise NonFiniteError("target non-finite at every initialization attempt", center)


def _run_chain(target, cfg: SamplerConfig, chain_seed: int):
    rng = np.random.default_rng(chain_seed)
    z, logp, grad = _init_point(target, rng, cfg)
    dim = target.dim
    inv_mass = (
        np.ones(dim) if cfg.inv_mass is None else np.asarray(cfg.inv_mass, float).copy()
    )

    warmup, draws = cfg.warmup, cfg.draws
    # Warmup phases: step-size-only buffer, then expanding memoryless
    # variance windows (each refreshes the mass matrix, so an early bad
    # excursion cannot permanently poison the metric), final buffer.
    b0 = min(max(25, int(0.15 * warmup)), max(1, warmup // 3))
    b2 = min(max(25, int(0.10 * warmup)), max(1, warmup // 3))
    window_end = warmup - b2
    window_bounds = []
    size = max(25, (window_end - b0) // 8)
    pos = b0
    while pos < window_end:
        end = min(pos + size, window_end)
        if window_end - end < 2 * size:
            end = window_end
        window_bounds.append(end)
        pos = end
        size *= 2
    window_bounds = set(window_bounds)
    if cfg.inv_mass is not None:
        # Warm start: the carried-over metric comes from a full previous
        # posterior and beats anything a short window can estimate, so only
        # step size adapts.
        window_bounds = set()
    window_draws: list[np.ndarray] = []

    eps = cfg.init_step or _find_reasonable_eps(target, z, logp, grad, inv_mass, rng)
    mu = np.log(10.0 * eps)
    log_eps_bar, h_bar = 0.0, 0.0
    gamma, t0, kappa = 0.05, 10.0, 0.75
    adapt_count = 0

    out = np.empty((draws, dim))
    divergences = 0
    accept_sum = 0.0

    for it in range(warmup + draws):
        r = rng.standard_normal(dim) / np.sqrt(inv_mass)
        joint0 = logp - _kinetic(r, inv_mass)
        log_u = joint0 + np.log(rng.random())
        z_minus = z_plus = z
        r_minus = r_plus = r
        grad_minus = grad_plus = grad
        z_prop, logp_prop, grad_prop = z, logp, grad
        n, cont, j = 1, True, 0
        alpha, n_alpha = 0.0, 1
        while cont and j < cfg.max_depth:
            v = 1 if rng.random() < 0.5 else -1
            if v == -1:
                t = _build_tree(
                    target, z_minus, r_minus, grad_minus,
                    log_u, v, j, eps, joint0, inv_mass, rng,
                )
                z_minus, r_minus, grad_minus = t.z_minus, t.r_minus, t.grad_minus
            else:
                t = _build_tree(
                    target, z_plus, r_plus, grad_plus,
                    log_u, v, j, eps, joint0, inv_mass, rng,
                )
                z_plus, r_plus, grad_plus = t.z_plus, t.r_plus, t.grad_plus
            if t.cont and t.n > 0 and rng.random() < min(1.0, t.n / n):
                z_prop, logp_prop, grad_prop = t.z_prop, t.logp_prop, t.grad_prop
            n += t.n
            alpha, n_alpha = t.alpha, t.n_alpha
            if t.divergent and it >= warmup:
                divergences += 1
            span = z_plus - z_minus
            cont = (
                t.cont
                and np.dot(span, inv_mass * r_minus) >= 0
                and np.dot(span, inv_mass * r_plus) >= 0
            )
            j += 1
        z, logp, grad = z_prop, logp_prop, grad_prop

        accept_prob = alpha / max(n_alpha, 1)
        if it < warmup:
            adapt_count += 1
            frac = 1.0 / (adapt_count + t0)
            h_bar = (1 - frac) * h_bar + frac * (cfg.target_accept - accept_prob)
            log_eps = mu - np.sqrt(adapt_count) / gamma * h_bar
            eta = adapt_count ** (-kappa)
            log_eps_bar = eta * log_eps + (1 - eta) * log_eps_bar
            eps = float(np.exp(log_eps))
            if window_bounds and b0 <= it < window_end:
                window_draws.append(z)
            if it + 1 in window_bounds and len(window_draws) >= 10:
                samples = np.asarray(window_draws)
                var = samples.var(axis=0, ddof=1)
                w = samples.shape[0]
                inv_mass = (w / (w + 5.0)) * var + (5.0 / (w + 5.0)) * 1e-3
                inv_mass = np.maximum(inv_mass, 1e-10)
                window_draws.clear()
                # Re-anchor step-size adaptation for the new metric.
                eps = _find_reasonable_eps(target, z, logp, grad, inv_mass, rng)
                mu = np.log(10.0 * eps)
                log_eps_bar, h_bar, adapt_count = 0.0, 0.0, 0
            if it == warmup - 1:
                eps = float(np.exp(log_eps_bar)) if adapt_count > 0 else eps
        else:
            out[it - warmup] = z
            accept_sum += accept_prob

    return out, eps, inv_mass, accept_sum / max(draws, 1), divergences


def hmc_sample(target: TargetDensity, cfg: SamplerConfig = SamplerConfig()):
    """Run NUTS chains against the target; returns (ChainSet, Diagnostics)."""
    from .diagnostics import ess, rhat

    seeds = tuple(int(s) for s in np.random.SeedSequence(cfg.seed).generate_state(cfg.chains))
    all_draws = np.empty((cfg.chains, cfg.draws, target.dim))
    steps = np.empty(cfg.chains)
    inv_masses = np.empty((cfg.chains, target.dim))
    accepts = np.empty(cfg.chains)
    divergences = 0
    for c in range(cfg.chains):
        draws, eps, inv_mass, acc, div = _run_chain(target, cfg, seeds[c])
        all_draws[c] = draws
        steps[c] = eps
        inv_masses[c] = inv_mass
        accepts[c] = acc
        divergences += div
    chains = ChainSet(
        draws=all_draws,
        seeds=seeds,
        accept_stat=accepts,
        divergences=divergences,
        step_size=steps,
        inv_mass=inv_masses,
    )
    if cfg.chains >= 2 and cfg.draws >= 4:
        diag = Diagnostics(rhat=rhat(chains), ess=ess(chains), divergences=divergences)
    else:
        nanv = np.full(target.dim, np.nan)
        diag = Diagnostics(rhat=nanv, ess=nanv, divergences=divergences)
    return chains, diag


# ---------------------------------------------------------------------------
# Gradient checking and derivative-free optimization
# ---------------------------------------------------------------------------


def grad_check(target: TargetDensity, point, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients."""
    z = np.asarray(point, dtype=float)
    _, grad = target(z)
    fd = np.empty_like(z)
    for i in range(z.size):
        zp, zm = z.copy(), z.copy()
        zp[i] += eps
        zm[i] -= eps
        fp, _ = target(zp)
        fm, _ = target(zm)
        fd[i] = (fp - fm) / (2 * eps)
    scale = np.maximum(np.abs(fd), np.maximum(np.abs(grad), 1.0))
    return float(np.max(np.abs(grad - fd) / scale))


def nelder_mead(objective, init, tol: float = 1e-8, max_iter: int = 20000) -> np.ndarray:
    """Minimize a scalar function with the Nelder-Mead simplex method.

    Returns the located argmin; raises MaxIterationsError if the simplex has
    not contracted to ``tol`` within the iteration budget.
    """
    x0 = np.atleast_1d(np.asarray(init, dtype=float))
    f0 = objective(x0 if x0.size > 1 else x0)
    if not np.isfinite(f0):
        raise ValueError("objective must be finite at the initial point")
    res = _sciopt.minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={
            "xatol": tol,
            "fatol": tol,
            "maxiter": max_iter,
            "maxfev": max_iter,
        },
    )
    if not res.success and "maximum" in (res.message or "").lower():
        raise MaxIterationsError(res.message)
    return np.atleast_1d(res.x)
