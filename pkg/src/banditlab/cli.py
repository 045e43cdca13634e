"""Command-line interface.

Subcommands cover the full pipeline: dataset generation, single fits with
diagnostics, posterior-predictive checks, policy replay, the repetition
harness, agent comparison, model selection, and a bundled per-case report.
All figures are emitted as CSV/JSON data for the external renderer.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace as _replace
from pathlib import Path

import numpy as np

from . import simulate
from .agent import StopRule
from .core import empirical_rates, load_dataset, save_dataset, validate_dataset
from .models import (
    MODEL_KINDS,
    ConvergenceFailure,
    default_spec,
    fit,
    pp_rate_draws,
    resolve_spec,
)
from .npe import ComparisonTable, compare_agents, drns_replay, run_repetitions
from .ppc import ac_ppc, coverage_check, write_coverage_csv
from .sampler import SamplerConfig
from .selection import test_to_complicate

CASES = {
    "fixed": simulate.gen_fixed,
    "drift": simulate.gen_drift,
    "armadd": simulate.gen_arm_addition,
}

# CLI aliases for model kinds
KIND_ALIASES = {
    "ibb": "IBB",
    "logistic": "Logistic",
    "bbglm": "BB-GLM",
    "bbdrift": "BB-Drift",
    "bbcoint": "BB-Coint",
}

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONVERGENCE = 2
EXIT_USAGE = 64


class ValidationError(ValueError):
    pass


def _kind(name: str) -> str:
    k = KIND_ALIASES.get(name.lower().replace("-", "").replace("_", ""))
    if k is None:
        raise ValidationError(f"unknown model {name!r}; choose from {sorted(KIND_ALIASES)}")
    return k


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args) -> object:
    if getattr(args, "case", None):
        return CASES[args.case](seed=args.seed)
    d = load_dataset(args.data)
    problems = validate_dataset(d)
    if problems:
        raise ValidationError(f"dataset failed validation: {problems[:3]}")
    return d


def _budget(args) -> SamplerConfig:
    return SamplerConfig(
        chains=args.chains, warmup=args.warmup, draws=args.draws, seed=args.seed
    )


def _add_data_args(p, with_case=True):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--data", help="dataset CSV path")
    if with_case:
        g.add_argument("--case", choices=sorted(CASES), help="built-in case study")
    p.add_argument("--seed", type=int, default=0)


def _add_budget_args(p):
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--warmup", type=int, default=500)
    p.add_argument("--draws", type=int, default=500)


def _add_rule_args(p):
    p.add_argument("--threshold", type=float, default=0.95)
    p.add_argument("--min-days", type=int, default=0)
    p.add_argument("--floor", type=float, default=0.0)


def _rule(args) -> StopRule:
    return StopRule(
        threshold=args.threshold,
        min_days=args.min_days,
        exploration_floor=args.floor,
    )


def _fit_summary_json(f) -> str:
    mean = f.theta_final.mean(axis=0)
    lo, hi = np.quantile(f.theta_final, [0.05, 0.95], axis=0)
    out = {
        "model": f.spec.kind,
        "theta_final": [
            {"mean": float(m), "ci90": [float(a), float(b)]}
            for m, a, b in zip(mean, lo, hi)
        ],
        # conjugate IBB fits sample the posterior exactly: no diagnostics
        "diagnostics": None
        if f.diag is None
        else {
            "max_rhat": float(f.diag.max_rhat()),
            "min_ess": float(np.min(f.diag.ess)),
            "divergences": int(f.diag.divergences),
        },
    }
    if f.eta is not None:
        out["eta_median"] = [float(v) for v in np.median(f.eta, axis=0)]
    return json.dumps(out, indent=2)


def _write_gain_csv(path, f):
    """Daily posterior gain (arm 2 minus arm 1) with nested central CIs."""
    gain = f.theta_daily[:, :, 1] - f.theta_daily[:, :, 0]  # S x T
    qs = np.nanquantile(
        gain, [0.16, 0.84, 0.10, 0.90, 0.025, 0.975], axis=0
    )
    mean = np.nanmean(gain, axis=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["day", "mean", "lo68", "hi68", "lo80", "hi80", "lo95", "hi95"])
        for t in range(gain.shape[1]):
            if np.isnan(mean[t]):
                continue
            w.writerow([t + 1] + [repr(float(v)) for v in (mean[t], *qs[:, t])])


def _write_policy_csv(path, res, labels):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["day", "arm", "weight", "theta_mean", "theta_lo", "theta_hi"])
        t, a = res.daily_weights.shape
        for day in range(t):
            for arm in range(a):
                tm = res.theta_mean[day, arm] if res.theta_mean is not None else np.nan
                tl = res.theta_lo[day, arm] if res.theta_lo is not None else np.nan
                th = res.theta_hi[day, arm] if res.theta_hi is not None else np.nan
                w.writerow(
                    [
                        day + 1,
                        labels[arm],
                        repr(float(res.daily_weights[day, arm])),
                        "" if np.isnan(tm) else repr(float(tm)),
                        "" if np.isnan(tl) else repr(float(tl)),
                        "" if np.isnan(th) else repr(float(th)),
                    ]
                )


def cmd_generate(args) -> int:
    out = _outdir(args.out)
    d = CASES[args.case](seed=args.seed)
    save_dataset(
        d,
        out / "dataset.csv",
        sidecar={"case": args.case, "seed": args.seed, "gamma": 0.02},
    )
    print(f"wrote {out / 'dataset.csv'}")
    return EXIT_OK


def cmd_fit(args) -> int:
    d = _load(args)
    out = _outdir(args.out)
    kind = _kind(args.model)
    f = fit(default_spec(kind, d.num_arms), d, sampler_cfg=_budget(args))
    name = kind.lower().replace("-", "")
    (out / f"fit_{name}.json").write_text(_fit_summary_json(f))
    if d.num_arms >= 2:
        _write_gain_csv(out / "gain_timeseries.csv", f)
    if f.diag is None:
        print("exact conjugate posterior")
    else:
        print(f"max R-hat {f.diag.max_rhat():.3f}")
    return EXIT_OK


def cmd_ppc(args) -> int:
    d = _load(args)
    out = _outdir(args.out)
    kind = _kind(args.model)
    f = fit(default_spec(kind, d.num_arms), d, sampler_cfg=_budget(args))
    pp = pp_rate_draws(f, d.n, seed=args.seed)
    emp = empirical_rates(d)
    cov = coverage_check(pp, emp, args.width)
    for k, arm in enumerate(cov.arms):
        write_coverage_csv(out / f"coverage_arm{k + 1}.csv", arm, emp, k)
    (out / "coverage_report.json").write_text(cov.to_json())
    ac = ac_ppc(pp, emp)
    (out / "ac_report.json").write_text(ac.to_json())
    print("coverage p-values:", [round(p, 4) for p in cov.p_values()])
    return EXIT_OK


def cmd_run(args) -> int:
    d = _load(args)
    out = _outdir(args.out)
    kind = _kind(args.model)
    res = drns_replay(
        d,
        default_spec(kind, d.num_arms),
        _rule(args),
        q=args.q,
        seed=args.seed,
    )
    _write_policy_csv(out / "policy_timeseries.csv", res, d.arm_labels)
    (out / "run_result.json").write_text(
        json.dumps(
            {
                "reward_rate": res.reward_rate,
                "stop_day": res.stop_day,
                "winner": None if res.winner is None else d.arm_labels[res.winner],
            }
        )
    )
    print(f"reward rate {res.reward_rate:.4f} stop day {res.stop_day}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    d = _load(args)
    out = _outdir(args.out)
    kinds = [_kind(m) for m in args.models.split(",")]
    rule = _rule(args)
    configs = [
        (f"{k.lower()}_{rule.threshold}_{rule.min_days}", default_spec(k, d.num_arms), rule)
        for k in kinds
    ]
    table = run_repetitions(
        configs, d, reps=args.reps, base_seed=args.seed, q=args.q, jobs=args.jobs
    )
    table.write_csv(out / "npe_results.csv")
    print(f"wrote {len(table.rows)} rows")
    return EXIT_OK


def cmd_compare(args) -> int:
    table = ComparisonTable.read_csv(args.table)
    out = _outdir(args.out)
    summary = compare_agents(table)
    (out / "comparison.json").write_text(summary.to_json())
    print(f"max R-hat {summary.diag_max_rhat:.3f}")
    return EXIT_OK


def cmd_select(args) -> int:
    d = _load(args)
    out = _outdir(args.out)
    res = test_to_complicate(d, threshold=args.threshold, seed=args.seed)
    (out / "selection.json").write_text(res.to_json())
    print(f"chosen: {res.chosen}")
    return EXIT_OK


def cmd_report(args) -> int:
    out = _outdir(args.out)
    d = CASES[args.case](seed=args.seed)
    save_dataset(d, out / "dataset.csv")
    emp = empirical_rates(d)
    kinds = {"fixed": ["Logistic", "BB-GLM"], "drift": ["BB-GLM", "BB-Drift"], "armadd": ["IBB", "BB-GLM"]}[args.case]
    cfg = _budget(args)
    for kind in kinds:
        name = kind.lower().replace("-", "")
        f = fit(default_spec(kind, d.num_arms), d, sampler_cfg=cfg)
        (out / f"fit_{name}.json").write_text(_fit_summary_json(f))
        pp = pp_rate_draws(f, d.n, seed=args.seed)
        cov = coverage_check(pp, emp, 0.8)
        sub = _outdir(out / name)
        for k, arm in enumerate(cov.arms):
            write_coverage_csv(sub / f"coverage_arm{k + 1}.csv", arm, emp, k)
        (sub / "coverage_report.json").write_text(cov.to_json())
        try:
            (sub / "ac_report.json").write_text(ac_ppc(pp, emp).to_json())
        except ValueError:
            pass
        if d.num_arms >= 2:
            _write_gain_csv(sub / "gain_timeseries.csv", f)
    rule = StopRule(threshold=0.95, min_days=args.min_days)
    res = drns_replay(d, default_spec(kinds[-1], d.num_arms), rule, seed=args.seed)
    _write_policy_csv(out / "policy_timeseries.csv", res, d.arm_labels)
    sel = test_to_complicate(d, seed=args.seed)
    (out / "selection.json").write_text(sel.to_json())
    print(f"report written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="banditlab")
    sub = p.add_subparsers(dest="command")

    g = sub.add_parser("generate", help="write a case-study dataset")
    g.add_argument("--case", choices=sorted(CASES), required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="fit one model and write diagnostics")
    _add_data_args(f)
    f.add_argument("--model", required=True)
    f.add_argument("--out", required=True)
    _add_budget_args(f)
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("ppc", help="posterior-predictive checks")
    _add_data_args(c)
    c.add_argument("--model", required=True)
    c.add_argument("--width", type=float, default=0.8)
    c.add_argument("--out", required=True)
    _add_budget_args(c)
    c.set_defaults(func=cmd_ppc)

    r = sub.add_parser("run", help="single policy replay")
    _add_data_args(r)
    r.add_argument("--model", required=True)
    r.add_argument("--q", type=float, default=0.01)
    r.add_argument("--out", required=True)
    _add_rule_args(r)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("evaluate", help="repetition harness")
    _add_data_args(e)
    e.add_argument("--models", required=True, help="comma-separated kinds")
    e.add_argument("--reps", type=int, default=10)
    e.add_argument("--q", type=float, default=0.01)
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--out", required=True)
    _add_rule_args(e)
    e.set_defaults(func=cmd_evaluate)

    k = sub.add_parser("compare", help="hierarchical agent comparison")
    k.add_argument("--table", required=True, help="npe_results.csv path")
    k.add_argument("--out", required=True)
    k.set_defaults(func=cmd_compare)

    s = sub.add_parser("select", help="test-to-complicate ladder")
    _add_data_args(s)
    s.add_argument("--threshold", type=float, default=0.1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_select)

    rep = sub.add_parser("report", help="bundle a case study's outputs")
    rep.add_argument("--case", choices=sorted(CASES), required=True)
    rep.add_argument("--seed", type=int, default=0)
    rep.add_argument("--min-days", type=int, default=7)
    rep.add_argument("--out", required=True)
    _add_budget_args(rep)
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] not in {
        "generate", "fit", "ppc", "run", "evaluate", "compare", "select",
        "report", "-h", "--help",
    }:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConvergenceFailure as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
