"""Position error of ML against MAP with an accelerometer roll/pitch prior,
swept over accelerometer noise.

    python scripts/run_fusion.py --trials 10000 --out fusion.csv
"""

import argparse
import math

import numpy as np

from minav.cli import write_csv_atomic
from minav.sim import ExperimentConfig, run_fusion_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--accel-noise", type=float, nargs="+", default=[0.01, 0.05, 0.2, 1.0])
    ap.add_argument("--prior-sigma-deg", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", default=None, help="ECDF CSV for the first noise level")
    args = ap.parse_args()

    cfg = ExperimentConfig(trials=args.trials, seed=args.seed)
    print(f"{'accel std':>10} {'ML median':>10} {'MAP median':>10} {'ratio':>7}")
    for i, std in enumerate(args.accel_noise):
        res = run_fusion_experiment(cfg, accel_noise_std=std,
                                    prior_sigma=math.radians(args.prior_sigma_deg),
                                    workers=args.workers)
        print(f"{std:10.3g} {np.median(res.ml_errors):10.4f} {np.median(res.map_errors):10.4f} "
              f"{res.median_ratio:7.3f}")
        if i == 0 and args.out:
            write_csv_atomic(args.out, ["estimator", "error", "ecdf"], res.ecdf())


if __name__ == "__main__":
    main()
