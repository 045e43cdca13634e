"""render: turn banditlab CSV/JSON outputs into PNG figures."""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureSpec, SchemaError, render

EXIT_OK = 0
EXIT_SCHEMA = 1
EXIT_USAGE = 64


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="render")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--in", dest="source", required=True, help="input CSV/JSON path")
    p.add_argument("--out", required=True, help="output PNG path")
    p.add_argument("--title", default="")
    p.add_argument(
        "--true-gain", type=float, default=None,
        help="dotted reference line for the gains plot",
    )
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    spec = FigureSpec(
        kind=args.kind,
        source=args.source,
        out=args.out,
        title=args.title,
        true_gain=args.true_gain,
    )
    try:
        out = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    print(f"wrote {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
