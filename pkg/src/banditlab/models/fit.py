"""Posterior inference and posterior-predictive simulation.

IBB is fitted by exact conjugacy and represented as Beta posterior draws so
that every model yields the same S x A draw matrix; the rest run through the
NUTS engine with an R-hat gate (one retry with doubled warmup).
"""

from __future__ import annotations

from dataclasses import dataclass, replace as _replace

import numpy as np

from ..core import BatchDataset
from ..sampler import ChainSet, Diagnostics, SamplerConfig, TargetDensity, hmc_sample
from .spec import ModelSpec, resolve_spec
from .targets import build_model

__all__ = ["PosteriorFit", "fit", "pp_rate_draws", "ConvergenceFailure"]

RHAT_LIMIT = 1.1


class ConvergenceFailure(RuntimeError):
    """R-hat still above the limit after the retry budget."""


@dataclass(frozen=True)
class PosteriorFit:
    """Monte-Carlo posterior summary used by policy, PPC, and reporting code.

    theta_final: S x A rate draws at the latest day (policy input).
    theta_daily: S x T x A day-level rate draws; static models broadcast,
        dynamic models use their walk states; NaN before an arm exists.
    eta: S x A dispersion-size draws, or None for pure-Binomial likelihoods.
    """

    spec: ModelSpec
    theta_final: np.ndarray
    theta_daily: np.ndarray
    eta: np.ndarray | None
    avail: np.ndarray
    raw: ChainSet | None = None
    diag: Diagnostics | None = None
    model: object = None  # internal target model, kept for warm starts

    @property
    def num_draws(self) -> int:
        return self.theta_final.shape[0]

    @property
    def num_arms(self) -> int:
        return self.theta_final.shape[1]

    @property
    def num_days(self) -> int:
        return self.theta_daily.shape[1]


def _fit_ibb(model, cfg: SamplerConfig) -> PosteriorFit:
    rng = np.random.default_rng(cfg.seed)
    a_post, b_post = model.posterior_ab()
    s = cfg.chains * cfg.draws
    theta = rng.beta(a_post, b_post, size=(s, model.num_arms))
    daily = np.repeat(theta[:, None, :], model.num_days, axis=1)
    return PosteriorFit(
        spec=model.spec,
        theta_final=theta,
        theta_daily=daily,
        eta=None,
        avail=model.d.avail.copy(),
        model=model,
    )


def _warm_config(cfg: SamplerConfig, model, warm: PosteriorFit) -> SamplerConfig:
    """Map a previous fit's location and mass matrix onto the new layout.

    Coordinates are matched by the models' stable keys; coordinates new to
    this layout (e.g. the latest day's walk innovation) start at the model
    default with unit mass.
    """
    prev = warm.model
    prev_index = {k: i for i, k in enumerate(prev.coord_keys())}
    mean = warm.raw.flat().mean(axis=0)
    prev_mass = warm.raw.inv_mass.mean(axis=0)
    init = model.init_center()
    inv_mass = np.ones(model.dim)
    for j, key in enumerate(model.coord_keys()):
        i = prev_index.get(key)
        if i is not None:
            init[j] = mean[i]
            inv_mass[j] = prev_mass[i]
    step = float(np.exp(np.mean(np.log(warm.raw.step_size))))
    return _replace(cfg, init_point=init, inv_mass=inv_mass, init_step=step)


def fit(
    spec: ModelSpec,
    d: BatchDataset,
    sampler_cfg: SamplerConfig | None = None,
    warm: PosteriorFit | None = None,
    rhat_limit: float = RHAT_LIMIT,
) -> PosteriorFit:
    """Fit a value model; unresolved hyperparameters are resolved first.

    ``warm`` re-anchors initialization, mass matrix, and step size from a
    previous fit of the same kind (daily refits); ``rhat_limit`` sets the
    convergence gate, with one doubled-warmup retry before failing.
    """
    cfg = sampler_cfg or SamplerConfig()
    spec = resolve_spec(spec, d)
    model = build_model(spec, d)
    if spec.kind == "IBB":
        return _fit_ibb(model, cfg)

    target = TargetDensity(dim=model.dim, eval=model.logp_grad)
    if warm is not None and warm.raw is not None and warm.spec.kind == spec.kind:
        cfg = _warm_config(cfg, model, warm)
    else:
        cfg = _replace(cfg, init_point=model.init_center())
    chains, diag = hmc_sample(target, cfg)
    if diag.max_rhat() > rhat_limit:
        cfg = _replace(cfg, warmup=2 * cfg.warmup, seed=cfg.seed + 1)
        chains, diag = hmc_sample(target, cfg)
        if diag.max_rhat() > rhat_limit:
            raise ConvergenceFailure(
                f"{spec.kind}: max R-hat {diag.max_rhat():.3f} after retry"
            )

    flat = chains.flat()
    s = flat.shape[0]
    theta_final = np.empty((s, model.num_arms))
    theta_daily = np.empty((s, model.num_days, model.num_arms))
    eta = np.empty((s, model.num_arms))
    has_eta = model.eta(flat[0]) is not None
    for i in range(s):
        z = flat[i]
        theta_final[i] = model.theta_final(z)
        theta_daily[i] = model.theta_daily(z)
        if has_eta:
            eta[i] = model.eta(z)
    return PosteriorFit(
        spec=spec,
        theta_final=theta_final,
        theta_daily=theta_daily,
        eta=eta if has_eta else None,
        avail=d.avail.copy(),
        raw=chains,
        diag=diag,
        model=model,
    )


def pp_rate_draws(fit_result: PosteriorFit, n: np.ndarray, seed: int = 0) -> np.ndarray:
    """S x T x A posterior-predictive rates Y_pred / N.

    Each draw replays the model's generative path for the observed sample
    sizes: daily Beta dispersion layer (when the model has one) around the
    draw's day-t rate, then Binomial counts. N = 0 cells are NaN.
    """
    n = np.asarray(n)
    s, t, a = fit_result.theta_daily.shape
    if n.shape != (t, a):
        raise ValueError(f"N must be {t} x {a}, got {n.shape}")
    rng = np.random.default_rng(seed)
    out = np.full((s, t, a), np.nan)
    cells = n > 0
    n_cells = np.broadcast_to(n, (s, t, a))[:, cells]
    theta = fit_result.theta_daily[:, cells]
    if fit_result.eta is None:
        mu = theta
    else:
        eta = np.broadcast_to(fit_result.eta[:, None, :], (s, t, a))[:, cells]
        alpha = np.maximum(theta * eta, 1e-12)
        beta = np.maximum((1.0 - theta) * eta, 1e-12)
        mu = rng.beta(alpha, beta)
        mu = np.clip(mu, 0.0, 1.0)
    y_pred = rng.binomial(n_cells.astype(np.int64), mu)
    out[:, cells] = y_pred / n_cells
    return out
