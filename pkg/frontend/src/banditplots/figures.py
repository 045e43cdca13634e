"""Matplotlib renderers for the five banditlab figure kinds.

Every figure is drawn at a fixed size and dpi on the Agg backend and saved
without varying metadata, so identical inputs produce byte-identical PNGs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "FigureSpec",
    "SchemaError",
    "build_figure",
    "render",
    "COVERED_COLOR",
    "MISSED_COLOR",
]

KINDS = ("coverage", "policy", "estimates", "gains", "comparison")

COVERED_COLOR = "#2a9d3a"  # point inside its CI
MISSED_COLOR = "#d62728"  # point outside its CI

FIGSIZE = (8.0, 5.0)
DPI = 100


class SchemaError(ValueError):
    """Input file does not match the documented banditlab schema."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    source: Path
    out: Path
    title: str = ""
    true_gain: float | None = None  # gains plot reference line

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; choose from {KINDS}")
        object.__setattr__(self, "source", Path(self.source))
        object.__setattr__(self, "out", Path(self.out))


def _read_csv(path: Path, columns: tuple[str, ...]) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames
            rows = list(reader)
    except FileNotFoundError:
        raise SchemaError(f"{path}: file not found")
    if header is None:
        raise SchemaError(f"{path}: empty file, expected columns {list(columns)}")
    for col in columns:
        if col not in header:
            raise SchemaError(f"{path}: missing column {col!r}")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def _floats(rows, col, path):
    out = []
    for r in rows:
        try:
            out.append(float(r[col]))
        except ValueError:
            raise SchemaError(f"{path}: column {col!r} has non-numeric value {r[col]!r}")
    return np.array(out)


def _new_axes(title):
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    if title:
        ax.set_title(title)
    return fig, ax


def _coverage_figure(spec: FigureSpec):
    rows = _read_csv(spec.source, ("day", "lo", "hi", "empirical", "covered"))
    day = _floats(rows, "day", spec.source)
    lo = _floats(rows, "lo", spec.source)
    hi = _floats(rows, "hi", spec.source)
    emp = _floats(rows, "empirical", spec.source)
    flags = []
    for r in rows:
        v = r["covered"].strip().lower()
        if v not in ("true", "false"):
            raise SchemaError(f"{spec.source}: column 'covered' must be true/false, got {r['covered']!r}")
        flags.append(v == "true")
    fig, ax = _new_axes(spec.title)
    ax.vlines(day, lo, hi, color="0.55", linewidth=1.4, zorder=1)
    colors = [COVERED_COLOR if f else MISSED_COLOR for f in flags]
    ax.scatter(day, emp, c=colors, s=26, zorder=2, label="daily rate")
    ax.set_xlabel("day")
    ax.set_ylabel("response rate")
    return fig


def _policy_rows(spec: FigureSpec):
    rows = _read_csv(
        spec.source, ("day", "arm", "weight", "theta_mean", "theta_lo", "theta_hi")
    )
    arms = sorted({r["arm"] for r in rows})
    by_arm = {a: [r for r in rows if r["arm"] == a] for a in arms}
    return arms, by_arm


def _policy_figure(spec: FigureSpec):
    arms, by_arm = _policy_rows(spec)
    fig, ax = _new_axes(spec.title)
    for a in arms:
        rows = by_arm[a]
        day = _floats(rows, "day", spec.source)
        w = _floats(rows, "weight", spec.source)
        ax.plot(day, w, marker=".", label=a)
    ax.set_xlabel("day")
    ax.set_ylabel("traffic weight")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    return fig


def _estimates_figure(spec: FigureSpec):
    arms, by_arm = _policy_rows(spec)
    fig, ax = _new_axes(spec.title)
    for a in arms:
        # days without a fit carry blank estimate cells; skip them
        rows = [r for r in by_arm[a] if r["theta_mean"] != ""]
        if not rows:
            continue
        day = _floats(rows, "day", spec.source)
        mean = _floats(rows, "theta_mean", spec.source)
        lo = _floats(rows, "theta_lo", spec.source)
        hi = _floats(rows, "theta_hi", spec.source)
        (line,) = ax.plot(day, mean, marker=".", label=a)
        ax.fill_between(day, lo, hi, alpha=0.2, color=line.get_color())
    ax.set_xlabel("day")
    ax.set_ylabel("posterior rate")
    ax.legend()
    return fig


def _gains_figure(spec: FigureSpec):
    cols = ("day", "mean", "lo68", "hi68", "lo80", "hi80", "lo95", "hi95")
    rows = _read_csv(spec.source, cols)
    vals = {c: _floats(rows, c, spec.source) for c in cols}
    day = vals["day"]
    fig, ax = _new_axes(spec.title)
    # nested central intervals, widest drawn thinnest
    for level, width in (("95", 1.0), ("80", 2.2), ("68", 3.6)):
        ax.vlines(
            day, vals[f"lo{level}"], vals[f"hi{level}"],
            color="#1f77b4", linewidth=width, alpha=0.8,
        )
    ax.plot(day, vals["mean"], ".", color="black", markersize=5)
    if spec.true_gain is not None:
        ax.axhline(spec.true_gain, linestyle=":", color="0.3", linewidth=1.2)
    ax.axhline(0.0, linestyle="-", color="0.8", linewidth=0.8, zorder=0)
    ax.set_xlabel("day")
    ax.set_ylabel("estimated gain")
    return fig


def _comparison_figure(spec: FigureSpec):
    try:
        obj = json.loads(Path(spec.source).read_text())
    except FileNotFoundError:
        raise SchemaError(f"{spec.source}: file not found")
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{spec.source}: not valid JSON ({exc})")
    coefs = obj.get("coefficients")
    if not coefs:
        raise SchemaError(f"{spec.source}: missing or empty 'coefficients'")
    for c in coefs:
        for key in ("name", "mean", "ci90"):
            if key not in c:
                raise SchemaError(f"{spec.source}: coefficient entry missing {key!r}")
    names = [c["name"] for c in coefs]
    means = np.array([c["mean"] for c in coefs])
    lo = np.array([c["ci90"][0] for c in coefs])
    hi = np.array([c["ci90"][1] for c in coefs])
    y = np.arange(len(names))[::-1]
    fig, ax = _new_axes(spec.title)
    ax.hlines(y, lo, hi, color="#1f77b4", linewidth=2.0)
    ax.plot(means, y, "o", color="black", markersize=4)
    ax.axvline(0.0, linestyle=":", color="0.4")
    ax.set_yticks(y)
    ax.set_yticklabels(names)
    ax.set_xlabel("effect on reward rate (90% CI)")
    fig.tight_layout()
    return fig


_BUILDERS = {
    "coverage": _coverage_figure,
    "policy": _policy_figure,
    "estimates": _estimates_figure,
    "gains": _gains_figure,
    "comparison": _comparison_figure,
}


def build_figure(spec: FigureSpec):
    """Validate inputs and return the assembled matplotlib Figure."""
    return _BUILDERS[spec.kind](spec)


def render(spec: FigureSpec) -> Path:
    """Render the figure to ``spec.out`` as a deterministic PNG."""
    fig = build_figure(spec)
    try:
        # drop the Software text chunk so the bytes are content-only
        fig.savefig(spec.out, format="png", dpi=DPI, metadata={"Software": None})
    finally:
        plt.close(fig)
    return spec.out
