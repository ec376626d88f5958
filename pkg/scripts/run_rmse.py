"""RMSE of ML and MAP estimates against prior uncertainty, with Cramer-Rao bounds.

    python scripts/run_rmse.py --target ori --trials 10000 --out rmse_ori.csv
    python scripts/run_rmse.py --target pos --trials 10000 --out rmse_pos.csv
"""

import argparse
import math
import time

from minav.cli import fmt, write_csv_atomic
from minav.estimators import Target
from minav.sim import ExperimentConfig, run_rmse_experiment

SWEEPS = {
    "ori": tuple(math.radians(d) for d in (0.001, 0.01, 0.1, 1.0, 10.0, 100.0)) + (1e3,),
    "pos": (1e-3, 1e-2, 1e-1, 0.5, 1.0, 10.0, 1e3),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--target", choices=SWEEPS, default="ori", help="block that carries the prior")
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    target = Target.ORIENTATION if args.target == "ori" else Target.POSITION
    cfg = ExperimentConfig(trials=args.trials, seed=args.seed, prior_target=target,
                           prior_sweep=SWEEPS[args.target])
    t0 = time.perf_counter()
    curve = run_rmse_experiment(cfg, workers=args.workers)
    print(f"{curve.block.value} RMSE, prior on {target.value}, {curve.trials} trials "
          f"({curve.failures} failed) in {time.perf_counter() - t0:.1f} s")
    print(f"ML RMSE {fmt(curve.ml_rmse)} +- {fmt(curve.ml_rmse_se)}, "
          f"bound without prior {fmt(curve.crb_no_prior)}, with perfect prior {fmt(curve.crb_perfect_prior)}")
    print(f"{'prior std':>12} {'MAP RMSE':>12} {'MAP/ML':>8} {'bound':>12}")
    for s, rm, b in zip(curve.sweep, curve.map_rmse, curve.crb):
        print(f"{s:12.4g} {rm:12.5g} {rm / curve.ml_rmse:8.3f} {b:12.5g}")
    if args.out:
        write_csv_atomic(args.out, ["sweep", "ml_rmse", "map_rmse", "crb", "crb_perfect"], curve.rows())


if __name__ == "__main__":
    main()
