"""ROC of the chi-squared, normalized and eigenvalue detectors when the true
noise covariance is a multiple of the modelled one.

    python scripts/run_roc.py --trials 100000 --scale 2 --out roc.csv
"""

import argparse
import time

from minav.cli import fmt, write_csv_atomic
from minav.sim import ExperimentConfig, run_roc_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--trials", type=int, default=100_000, help="trials per hypothesis")
    ap.add_argument("--scale", type=float, nargs="+", default=[1.0, 2.0, 4.0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", default=None, help="CSV of the curves for the last scale")
    args = ap.parse_args()

    cfg = ExperimentConfig(trials=args.trials, seed=args.seed)
    t0 = time.perf_counter()
    results = run_roc_sweep(cfg, args.scale, workers=args.workers)
    for scale, res in results.items():
        aucs = "  ".join(f"{d.value} {fmt(a)}" for d, a in res.auc.items())
        print(f"scale {scale:g}: AUC {aucs}")
    print(f"{time.perf_counter() - t0:.1f} s")
    if args.out:
        rows = [(d.value, float(f), float(t)) for d, pts in res.curves.items() for f, t in pts]
        rows += [("auc", d.value, float(a)) for d, a in res.auc.items()]
        write_csv_atomic(args.out, ["detector", "fpr", "tpr"], rows)


if __name__ == "__main__":
    main()
