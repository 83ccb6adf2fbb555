"""Coupled-residual sweep over k for the type-A functional CLT.

Prints the median sup residual per k and the fitted log-log slope of
``median sup |X - sqrt(k) phi - W|``; the slope should be close to -1/2.

    python scripts/rate_sweep.py --k 25 50 100 200 400 800 1600 --paths 1000
"""
import argparse

from frozenbessel.harness import config_from_mapping, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--rs", default="A", choices=["A", "B", "D"])
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--nu", type=float, default=None)
    ap.add_argument("--k", type=float, nargs="+", default=[50, 200, 800])
    ap.add_argument("--paths", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--out", default="runs/rate-sweep")
    args = ap.parse_args()

    cfg = config_from_mapping(
        {"kind": "rate-sweep", "seed": args.seed, "out": args.out,
         "model": {"root_system": args.rs, "n": args.n, "nu": args.nu},
         "ensemble": {"paths": args.paths, "k_values": args.k, "workers": args.workers}})
    s = run_experiment(cfg)
    d = s.details
    print(f"{'k':>8} {'median sup residual':>20} {'q90':>10} {'median sup clt error':>22}")
    for k, m, q, e in zip(d["k_values"], d["median_sup_residual"], d["q90_sup_residual"],
                          d["median_sup_clt_error"]):
        print(f"{k:8.0f} {m:20.4f} {q:10.4f} {e:22.5f}")
    lo, hi = d["slope_ci"]
    print(f"slope {s.deltas['slope']:.3f} (95% CI {lo:.3f} .. {hi:.3f}); checks {s.checks}")


if __name__ == "__main__":
    main()
