"""Command-line interface.

``frozenbessel <kind> [flags]`` runs one experiment; ``frozenbessel run --config FILE``
takes the kind from the config (or ``--kind``). Exit status: 0 when every check
passes, 2 when a check fails, 1 on an error.
"""
from __future__ import annotations

import argparse
import json
import sys

from ..errors import FreezingError
from .config import KINDS, config_from_mapping, load_config
from .experiments import run_experiment

EXIT_OK, EXIT_ERROR, EXIT_THRESHOLD = 0, 1, 2


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _add_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="TOML experiment file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--paths", type=int, help="ensemble size")
    p.add_argument("--k", type=float, help="coupling (beta for type B)")
    p.add_argument("--k-values", type=_floats, help="comma-separated couplings for rate-sweep")
    p.add_argument("--grid", type=int, help="number of time grid points")
    p.add_argument("--t", type=float, dest="horizon", help="time horizon")
    p.add_argument("--rs", choices=["A", "B", "D"], help="root system")
    p.add_argument("--n", type=int, help="particle count")
    p.add_argument("--nu", type=float)
    p.add_argument("--lam", type=float, help="OU rate")
    p.add_argument("--c", type=float, help="scale of the special start")
    p.add_argument("--x", type=_floats, help="explicit start, comma-separated")
    p.add_argument("--workers", type=int)
    p.add_argument("--dt", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frozenbessel",
                                     description="Freezing-limit experiments for Bessel processes.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment named in --config or --kind")
    run.add_argument("--kind", choices=KINDS)
    _add_flags(run)
    for kind in KINDS:
        _add_flags(sub.add_parser(kind, help=f"run a {kind} experiment"))
    return parser


def _overrides(args) -> dict:
    o = {
        "seed": args.seed, "out": args.out, "paths": args.paths, "k": args.k,
        "k_values": args.k_values, "grid_points": args.grid, "horizon": args.horizon,
        "root_system": args.rs, "n": args.n, "nu": args.nu, "lam": args.lam, "c": args.c,
        "workers": args.workers, "dt": args.dt,
    }
    if args.x is not None:
        o["x"] = args.x
        o["start_mode"] = "explicit"
    return o


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = _overrides(args)
    kind = args.command if args.command != "run" else args.kind
    overrides["kind"] = kind
    try:
        if args.config:
            cfg = load_config(args.config, overrides)
        else:
            cfg = config_from_mapping({}, overrides)
        summary = run_experiment(cfg)
    except (FreezingError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(json.dumps({"kind": summary.kind, "passed": summary.passed, "checks": summary.checks,
                      "deltas": summary.deltas, "out": cfg.out}, default=float, indent=2))
    return EXIT_OK if summary.passed else EXIT_THRESHOLD


if __name__ == "__main__":
    sys.exit(main())
