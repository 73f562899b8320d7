"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 runtime error, 3 budget exceeded.
"""
from __future__ import annotations

import argparse
import json
import sys

from .errors import BudgetExceededError, ConfigError, GraspCoverError
from .storage import canonical_report_hash


def _add_common(p: argparse.ArgumentParser, needs_out: bool = True):
    p.add_argument("--config", required=True, help="run config (.toml or .json)")
    if needs_out:
        p.add_argument("--out", default=None, help="output directory (default: config out_dir)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--resume", action="store_true", help="skip completed objects/cells")
    p.add_argument("--seed-override", default=None, help="comma-separated seeds replacing the config list")
    p.add_argument("--eps", default=None, help="comma-separated eps values replacing the config list")
    p.add_argument("--gamma", default=None, help="comma-separated gamma values replacing the config list")


def _load(args):
    from .config import load_config, validate_config

    cfg = load_config(args.config)
    if getattr(args, "seed_override", None):
        cfg.seeds = [int(s) for s in args.seed_override.split(",")]
    if getattr(args, "eps", None):
        cfg.eps = [float(s) for s in args.eps.split(",")]
    if getattr(args, "gamma", None):
        cfg.gamma = [float(s) for s in args.gamma.split(",")]
    validate_config(cfg)
    out = getattr(args, "out", None) or cfg.out_dir
    return cfg, out


def cmd_reference(args) -> int:
    from .pipeline import run_reference, write_manifest

    cfg, out = _load(args)
    stage = run_reference(cfg, out, jobs=args.jobs, resume=args.resume)
    write_manifest(cfg, out, {"reference": stage})
    print(json.dumps(stage["objects"], indent=2, sort_keys=True))
    return 0


def cmd_evaluate(args) -> int:
    from .pipeline import run_evaluate, run_reference, write_manifest

    cfg, out = _load(args)
    stages = {}
    stages["reference"] = run_reference(cfg, out, jobs=args.jobs, resume=True)
    stages["evaluate"] = run_evaluate(cfg, out, jobs=args.jobs, resume=args.resume)
    write_manifest(cfg, out, stages)
    print(f"report: {out}/report.csv")
    print(f"aggregate: {out}/aggregate.csv")
    return 0


def cmd_farthest(args) -> int:
    from .pipeline import run_farthest

    grasps = run_farthest(
        args.reference, k=args.k, gamma=args.gamma, omega=args.omega, seed_index=args.seed_index
    )
    text = json.dumps(grasps, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def cmd_validate_config(args) -> int:
    from .config import load_config

    cfg = load_config(args.config)
    print(json.dumps({"config_hash": cfg.config_hash(), "config": cfg.to_dict()}, indent=2, sort_keys=True))
    return 0


def cmd_make_meshes(args) -> int:
    from .primitives import write_builtin_meshes

    paths = write_builtin_meshes(args.out, names=args.names or None)
    for p in paths:
        print(p)
    return 0


def cmd_hash_report(args) -> int:
    for path in args.csv:
        print(f"{canonical_report_hash(path)}  {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graspcover", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reference", help="generate dense labeled reference sets")
    _add_common(p)
    p.set_defaults(fn=cmd_reference)

    p = sub.add_parser("evaluate", help="run sampler comparison against the references")
    _add_common(p)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("farthest", help="k diverse robust grasps from a reference file")
    p.add_argument("--reference", required=True, help="path to a .ref file")
    p.add_argument("-k", type=int, required=True)
    p.add_argument("--gamma", type=float, default=0.75)
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--seed-index", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_farthest)

    p = sub.add_parser("validate-config", help="parse, validate, and print a config")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_validate_config)

    p = sub.add_parser("make-meshes", help="write the builtin test meshes as OBJ files")
    p.add_argument("--out", required=True)
    p.add_argument("names", nargs="*", help="subset of builtin names")
    p.set_defaults(fn=cmd_make_meshes)

    p = sub.add_parser("hash-report", help="canonical hash of report CSVs (timing masked)")
    p.add_argument("csv", nargs="+")
    p.set_defaults(fn=cmd_hash_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 3
    except GraspCoverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
