"""CLI: render figures from report CSVs.

    plots coverage --in report.csv --metric cov1 --eps 0.109 --out fig/cov1
    plots precision --in report.csv --out fig/precision
"""
from __future__ import annotations

import argparse
import sys

from .figures import plot_coverage, plot_precision
from .frame import EmptyData, SchemaMismatch


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plots", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coverage", help="coverage curves (mean +- std across cells)")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="report CSV paths")
    p.add_argument("--metric", choices=["cov1", "cov2", "cov3"], default="cov1")
    p.add_argument("--eps", type=float, default=None, help="eps slice (required if several)")
    p.add_argument("--gamma", default="", help="gamma slice ('' = plain reference)")
    p.add_argument("--out", required=True, help="output path stem (writes .png and .svg)")

    q = sub.add_parser("precision", help="final-checkpoint precision bars")
    q.add_argument("--in", dest="inputs", nargs="+", required=True)
    q.add_argument("--gamma", default="")
    q.add_argument("--out", required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "coverage":
            res = plot_coverage(args.inputs, args.metric, args.out, eps=args.eps, gamma=args.gamma)
        else:
            res = plot_precision(args.inputs, args.out, gamma=args.gamma)
    except (SchemaMismatch, EmptyData, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for p in res.out_paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
