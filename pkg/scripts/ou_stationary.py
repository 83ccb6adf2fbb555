"""OU extension: approach of the limit covariance to its stationary value.

Prints ``max |Sigma_t - (E - A)^{-1} / (2 lam)|`` along a time grid, then runs a
Monte Carlo check of the covariance at the final time.

    python scripts/ou_stationary.py --lam 0.5 --t 6 --paths 2000
"""
import argparse

import numpy as np

from frozenbessel.fluctuation import covariance_closed_form
from frozenbessel.harness import config_from_mapping, run_experiment
from frozenbessel.harness.experiments import stationary_covariance
from frozenbessel.model import Kind, RootSystem


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--lam", type=float, default=0.5)
    ap.add_argument("--c", type=float, default=1.0)
    ap.add_argument("--t", type=float, default=6.0)
    ap.add_argument("--k", type=float, default=400.0)
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--out", default="runs/ou")
    args = ap.parse_args()

    rs = RootSystem(Kind.A, args.n)
    stat = stationary_covariance(args.n, args.lam)
    for t in np.linspace(0, args.t, 7)[1:]:
        sigma = covariance_closed_form(rs, None, args.c, t, lam=args.lam).sigma
        print(f"t={t:6.2f}  max |Sigma_t - Sigma_inf| = {np.abs(sigma - stat).max():.3e}")

    cfg = config_from_mapping(
        {"kind": "ou", "seed": args.seed, "out": args.out,
         "model": {"root_system": "A", "n": args.n, "k": args.k, "lam": args.lam},
         "start": {"c": args.c}, "time": {"horizon": args.t, "points": 61},
         "ensemble": {"paths": args.paths, "workers": args.workers}})
    s = run_experiment(cfg)
    print(f"checks {s.checks}; deltas {s.deltas}")


if __name__ == "__main__":
    main()
