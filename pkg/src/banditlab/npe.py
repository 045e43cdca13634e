"""Nonstationary policy evaluation by rejection-sampling replay.

A logged dataset (collected under a known uniform policy over available
arms) is replayed against an agent: each day the agent's weights determine
per-arm acceptance probabilities, the logged batch is thinned accordingly,
and the accepted-sample mean estimates the reward rate the agent would
have achieved. A repetition harness and a Bayesian hierarchical comparison
of agent factors sit on top.
"""

from __future__ import annotations

import csv
import json
import zlib
from dataclasses import dataclass, field, replace as _replace

import numpy as np
from scipy.stats import gamma as gamma_dist

from .agent import PolicyWeights, StopRule, agent_step
from .core import BatchDataset
from .models import ConvergenceFailure, ModelSpec, fit, resolve_spec
from .sampler import SamplerConfig, TargetDensity, hmc_sample

__all__ = [
    "EmptySupport",
    "RunResult",
    "ComparisonTable",
    "ComparisonSummary",
    "acceptance_probs",
    "drns_replay",
    "run_repetitions",
    "compare_agents",
]

# reduced per-day budget; the full default stays for standalone fits
REPLAY_CFG = SamplerConfig(chains=2, warmup=300, draws=300)


class EmptySupport(ValueError):
    """Agent and logging policies share no available arm."""


@dataclass(frozen=True)
class RunResult:
    agent_id: str
    reward_rate: float
    stop_day: int | None
    winner: int | None
    daily_weights: np.ndarray  # T x A
    accepted_counts: np.ndarray  # T x A
    seed: int
    theta_mean: np.ndarray | None = None  # T x A, NaN before the first fit
    theta_lo: np.ndarray | None = None  # 5% quantile
    theta_hi: np.ndarray | None = None  # 95% quantile
    failed: bool = False


@dataclass(frozen=True)
class ComparisonTable:
    """Rows of (agent_id, model kind, rule label, repetition, result)."""

    rows: tuple[dict, ...]

    def usable(self) -> tuple[dict, ...]:
        return tuple(r for r in self.rows if not r["failed"])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["agent", "model", "rule", "rep", "reward_rate", "stop_day", "winner"])
            for r in self.rows:
                w.writerow(
                    [
                        r["agent"],
                        r["model"],
                        r["rule"],
                        r["rep"],
                        "" if r["failed"] else repr(r["reward_rate"]),
                        r["stop_day"] if r["stop_day"] is not None else "",
                        r["winner"] if r["winner"] is not None else "",
                    ]
                )

    @classmethod
    def read_csv(cls, path) -> "ComparisonTable":
        rows = []
        with open(path, newline="") as fh:
            for r in csv.DictReader(fh):
                failed = r["reward_rate"] == ""
                rows.append(
                    {
                        "agent": r["agent"],
                        "model": r["model"],
                        "rule": r["rule"],
                        "rep": int(r["rep"]),
                        "reward_rate": float(r["reward_rate"]) if not failed else np.nan,
                        "stop_day": int(r["stop_day"]) if r["stop_day"] else None,
                        "winner": int(r["winner"]) if r["winner"] else None,
                        "failed": failed,
                    }
                )
        return cls(rows=tuple(rows))


def acceptance_probs(w: PolicyWeights, logging: PolicyWeights, q: float = 0.01) -> np.ndarray:
    """Per-arm acceptance probabilities min(1, r_a / M).

    r_a = w_a / u_a over the shared support; M is the smallest ratio such
    that the logging-mass of arms with larger ratio is at most q (q=0 gives
    the max ratio, i.e. unbiased thinning).
    """
    if not 0.0 <= q < 1.0:
        raise ValueError("q must be in [0,1)")
    support = logging.available & (logging.w > 0)
    if not support.any():
        raise EmptySupport("logging policy has empty support")
    a = logging.w.size
    r = np.zeros(a)
    r[support] = w.w[support] / logging.w[support]
    # smallest ratio whose strictly-greater u-mass is <= q
    order = np.argsort(r[support])
    u_sorted = logging.w[support][order]
    r_sorted = r[support][order]
    mass_above = np.concatenate([np.cumsum(u_sorted[::-1])[::-1][1:], [0.0]])
    idx = np.nonzero(mass_above <= q + 1e-15)[0][0]
    m = r_sorted[idx]
    if m <= 0:
        return np.where(support, 1.0, 0.0)
    return np.where(support, np.minimum(1.0, r / m), 0.0)


def _uniform_logging(avail_row: np.ndarray) -> PolicyWeights:
    avail_row = np.asarray(avail_row, dtype=bool)
    return PolicyWeights(w=avail_row / avail_row.sum(), available=avail_row)


def _thin_day(rng, n_row, y_row, probs):
    """Binomial thinning of N, hypergeometric subsampling of Y."""
    acc_n = rng.binomial(n_row, probs)
    acc_y = np.zeros_like(acc_n)
    for a in range(n_row.size):
        if acc_n[a] > 0:
            acc_y[a] = rng.hypergeometric(y_row[a], n_row[a] - y_row[a], acc_n[a])
    return acc_n, acc_y


def drns_replay(
    d: BatchDataset,
    model_spec: ModelSpec | None,
    rule: StopRule,
    q: float = 0.01,
    seed: int = 0,
    agent_id: str = "agent",
    sampler_cfg: SamplerConfig = REPLAY_CFG,
    fixed_weights: np.ndarray | None = None,
) -> RunResult:
    """Replay the logged dataset against a TS agent (or fixed weights).

    Day loop: fit on accepted data through day t, take an agent step, thin
    day t+1's logged batch by the resulting acceptance probabilities. Day
    1 is served uniformly (no data yet). ``fixed_weights`` bypasses the
    model entirely and replays a static policy, used for calibration tests.
    """
    t, a = d.n.shape
    rng = np.random.default_rng(seed)
    prev_fit = None
    acc_n = np.zeros((t, a), dtype=int)
    acc_y = np.zeros((t, a), dtype=int)
    weights = np.zeros((t, a))
    th_mean = np.full((t, a), np.nan)
    th_lo = np.full((t, a), np.nan)
    th_hi = np.full((t, a), np.nan)
    stop_day = None
    winner = None
    spec = resolve_spec(model_spec, d) if model_spec is not None else None

    for day in range(1, t + 1):
        avail_row = d.avail[day - 1]
        if not avail_row.any():
            continue
        if winner is not None:
            w = np.zeros(a)
            w[winner] = 1.0
            pol = PolicyWeights(w=w, available=avail_row)
        elif fixed_weights is not None:
            w = np.where(avail_row, fixed_weights, 0.0)
            pol = PolicyWeights(w=w / w.sum(), available=avail_row)
        elif day == 1 or not acc_n[: day - 1].any():
            pol = _uniform_logging(avail_row)
        else:
            sub = BatchDataset(
                n=acc_n[: day - 1],
                y=acc_y[: day - 1],
                avail=d.avail[: day - 1],
                arm_labels=d.arm_labels,
            )
            day_seed = int(rng.integers(2**32))
            cfg = _replace(sampler_cfg, seed=day_seed)
            if prev_fit is not None:
                # warm daily refit: short re-adaptation, looser gate
                cfg = _replace(cfg, warmup=max(100, sampler_cfg.warmup // 3))
            f = fit(spec, sub, sampler_cfg=cfg, warm=prev_fit, rhat_limit=1.25)
            prev_fit = f
            th_mean[day - 1] = f.theta_final.mean(axis=0)
            th_lo[day - 1], th_hi[day - 1] = np.quantile(
                f.theta_final, [0.05, 0.95], axis=0
            )
            pol, decision = agent_step(f, day - 1, rule, available=avail_row)
            if decision.stopped:
                stop_day = day - 1
                winner = decision.winner
        weights[day - 1] = pol.w
        probs = acceptance_probs(pol, _uniform_logging(avail_row), q)
        acc_n[day - 1], acc_y[day - 1] = _thin_day(
            rng, d.n[day - 1], d.y[day - 1], probs
        )

    total_n = int(acc_n.sum())
    reward = float(acc_y.sum() / total_n) if total_n else 0.0
    return RunResult(
        agent_id=agent_id,
        reward_rate=reward,
        stop_day=stop_day,
        winner=winner,
        daily_weights=weights,
        accepted_counts=acc_n,
        seed=seed,
        theta_mean=th_mean,
        theta_lo=th_lo,
        theta_hi=th_hi,
    )


def _rep_seed(base_seed: int, agent_id: str, rep: int) -> int:
    key = f"{base_seed}:{agent_id}:{rep}".encode()
    return zlib.crc32(key) ^ (base_seed << 1)


def _one_rep(job):
    d, spec, rule, q, sampler_cfg, agent_id, label, rep, seed = job
    base = {"agent": agent_id, "model": spec.kind, "rule": label, "rep": rep}
    try:
        res = drns_replay(
            d, spec, rule, q=q, seed=seed, agent_id=agent_id,
            sampler_cfg=sampler_cfg,
        )
        return {
            **base,
            "reward_rate": res.reward_rate,
            "stop_day": res.stop_day,
            "winner": res.winner,
            "failed": False,
        }
    except ConvergenceFailure:
        return {
            **base,
            "reward_rate": np.nan,
            "stop_day": None,
            "winner": None,
            "failed": True,
        }


def run_repetitions(
    configs: list[tuple[str, ModelSpec, StopRule]],
    d: BatchDataset,
    reps: int,
    base_seed: int = 0,
    q: float = 0.01,
    sampler_cfg: SamplerConfig = REPLAY_CFG,
    jobs: int = 1,
) -> ComparisonTable:
    """R replays per (agent_id, spec, rule) config; failures are flagged rows.

    ``jobs`` > 1 spreads repetitions over worker processes; per-rep seeds
    make the result identical either way.
    """
    if reps < 2:
        raise ValueError("need at least 2 repetitions")
    work = []
    for agent_id, spec, rule in configs:
        label = f"t{rule.threshold}_m{rule.min_days}"
        for rep in range(reps):
            seed = _rep_seed(base_seed, agent_id, rep)
            work.append((d, spec, rule, q, sampler_cfg, agent_id, label, rep, seed))
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_one_rep, work))
    else:
        rows = [_one_rep(j) for j in work]
    return ComparisonTable(rows=tuple(rows))


@dataclass(frozen=True)
class ComparisonSummary:
    names: tuple[str, ...]
    means: np.ndarray
    ci_lo: np.ndarray  # 90% central
    ci_hi: np.ndarray
    contrasts: dict  # "(a)-(b)" -> P(effect_a > effect_b)
    diag_max_rhat: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "coefficients": [
                    {
                        "name": n,
                        "mean": float(m),
                        "ci90": [float(lo), float(hi)],
                    }
                    for n, m, lo, hi in zip(self.names, self.means, self.ci_lo, self.ci_hi)
                ],
                "contrasts": {k: float(v) for k, v in self.contrasts.items()},
                "max_rhat": self.diag_max_rhat,
            }
        )


def _design(rows):
    models = sorted({r["model"] for r in rows})
    rules = sorted({r["rule"] for r in rows})
    m_lv, r_lv = models[1:], rules[1:]  # first level is baseline
    names = ["intercept"]
    names += [f"model[{m}]" for m in m_lv]
    names += [f"rule[{r}]" for r in r_lv]
    names += [f"model[{m}]:rule[{r}]" for m in m_lv for r in r_lv]
    x = np.zeros((len(rows), len(names)))
    y = np.empty(len(rows))
    for i, row in enumerate(rows):
        x[i, 0] = 1.0
        col = 1
        for m in m_lv:
            x[i, col] = float(row["model"] == m)
            col += 1
        for r in r_lv:
            x[i, col] = float(row["rule"] == r)
            col += 1
        for m in m_lv:
            for r in r_lv:
                x[i, col] = float(row["model"] == m and row["rule"] == r)
                col += 1
        y[i] = row["reward_rate"]
    groups = np.zeros(len(names), dtype=int)  # 0: intercept+model, 1: rule, 2: interactions
    nm, nr = len(m_lv), len(r_lv)
    groups[1 : 1 + nm] = 0
    groups[1 + nm : 1 + nm + nr] = 1
    groups[1 + nm + nr :] = 2
    return names, x, y, groups


def _comparison_target(x, y, groups):
    """Joint density of the hierarchical linear comparison model.

    Coefficients beta_j ~ N(0, sigma2_g(j)); sigma2_g ~ InvGamma(2, s_g)
    with s_g ~ Gamma(4, rate 2); observation noise sigma2_e has the same
    prior with its own scale. Parameterization: [beta (k), log sigma2_g
    (3), log s_g (3), log sigma2_e, log s_e].
    """
    n, k = x.shape
    ngroups = 3
    dim = k + 2 * ngroups + 2
    xtx = x.T @ x
    xty = x.T @ y
    yty = float(y @ y)

    def logp_grad(z):
        beta = z[:k]
        tau_g = np.clip(z[k : k + ngroups], -30, 30)
        logs_g = np.clip(z[k + ngroups : k + 2 * ngroups], -30, 30)
        tau_e = min(max(z[-2], -30.0), 30.0)
        logs_e = min(max(z[-1], -30.0), 30.0)
        sig2_g = np.exp(tau_g)
        s_g = np.exp(logs_g)
        sig2_e = np.exp(tau_e)
        s_e = np.exp(logs_e)

        grad = np.zeros(dim)
        resid_ss = yty - 2.0 * beta @ xty + beta @ xtx @ beta
        lp = -0.5 * n * (np.log(2 * np.pi) + tau_e) - resid_ss / (2 * sig2_e)
        g_beta = (xty - xtx @ beta) / sig2_e
        grad[-2] = -0.5 * n + resid_ss / (2 * sig2_e)

        counts = np.bincount(groups, minlength=ngroups).astype(float)
        for g in range(ngroups):
            sel = groups == g
            b = beta[sel]
            ss = float(b @ b)
            lp += -0.5 * counts[g] * (np.log(2 * np.pi) + tau_g[g]) - ss / (
                2 * sig2_g[g]
            )
            g_beta[sel] += -b / sig2_g[g]
            grad[k + g] = -0.5 * counts[g] + ss / (2 * sig2_g[g])
        grad[:k] = g_beta

        # sigma2 ~ InvGamma(alpha=2, beta=s): lp = 2 log s - 3 tau - s/sig2 - lgamma(2)
        all_tau = np.concatenate([tau_g, [tau_e]])
        all_s = np.concatenate([s_g, [s_e]])
        lp += float(np.sum(2.0 * np.log(all_s) - 3.0 * all_tau - all_s / np.exp(all_tau)))
        # +tau Jacobian for log sigma2
        lp += float(np.sum(all_tau))
        grad[k : k + ngroups] += -3.0 + s_g / sig2_g + 1.0
        grad[-2] += -3.0 + s_e / sig2_e + 1.0

        # s ~ Gamma(4, rate 2) with log Jacobian: lp = 4 log s - 2 s + const
        lp += float(np.sum(4.0 * np.log(all_s) - 2.0 * all_s))
        # d/dlog s of [2 log s - s/sig2 + 4 log s - 2 s]
        grad[k + ngroups : k + 2 * ngroups] = 2.0 - s_g / sig2_g + 4.0 - 2.0 * s_g
        grad[-1] = 2.0 - s_e / sig2_e + 4.0 - 2.0 * s_e
        return float(lp), grad

    return TargetDensity(dim=dim, eval=logp_grad), k


def compare_agents(
    table: ComparisonTable, sampler_cfg: SamplerConfig | None = None
) -> ComparisonSummary:
    """Posterior effect summary of the agent-factor linear model."""
    rows = table.usable()
    if len(rows) < 2:
        raise ValueError("need at least 2 usable rows")
    names, x, y, groups = _design(list(rows))
    target, k = _comparison_target(x, y, groups)
    cfg = sampler_cfg or SamplerConfig(chains=4, warmup=500, draws=500, seed=11)
    init = np.zeros(target.dim)
    init[0] = float(np.mean(y))
    init[k:] = np.log(0.05)
    cfg = _replace(cfg, init_point=init)
    chains, diag = hmc_sample(target, cfg)
    draws = chains.flat()[:, :k]
    means = draws.mean(axis=0)
    lo, hi = np.quantile(draws, [0.05, 0.95], axis=0)

    contrasts = {}
    for i in range(1, k):
        for j in range(i + 1, k):
            if names[i].split("[")[0] != names[j].split("[")[0]:
                continue
            key = f"{names[i]}-{names[j]}"
            contrasts[key] = float(np.mean(draws[:, i] > draws[:, j]))
    return ComparisonSummary(
        names=tuple(names),
        means=means,
        ci_lo=lo,
        ci_hi=hi,
        contrasts=contrasts,
        diag_max_rhat=float(diag.max_rhat()),
    )
