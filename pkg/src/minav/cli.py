"""Command-line front end.

Exit codes: 0 success (``detect``: no fault), 1 ``detect`` rejected the
model, 2 usage or schema error, 3 estimation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import crb as crb_mod
from .detect import Detector, chi2_pvalue, chi2_statistic, detect
from .dipole import MomentSchedule, simulate_packet
from .errors import BadConfig, EstimationError, InvalidPrior, MinavError, SchemaError
from .estimators import (
    GaussianPrior,
    Target,
    map_estimate,
    ml_estimate,
    orientation_prior_from_accel,
    resolve_hemisphere,
    simulate_accel,
)
from .geom import EulerAngles, NavState
from .packetfile import dump_packet, load_packet
from .sim import ExperimentConfig, run_fusion_experiment, run_roc_experiment, run_rmse_experiment

EXIT_OK, EXIT_REJECT, EXIT_USAGE, EXIT_ESTIMATION = 0, 1, 2, 3


class UsageError(Exception):
    pass


def parse_value(text: str) -> float:
    """A float; a trailing ``deg`` converts degrees to radians."""
    t = text.strip().lower()
    try:
        if t.endswith("deg"):
            return math.radians(float(t[:-3]))
        return float(t)
    except ValueError:
        raise UsageError(f"not a number: {text!r}") from None


def parse_list(text: str, n=None) -> np.ndarray:
    vals = np.array([parse_value(v) for v in text.split(",") if v.strip()])
    if n is not None and vals.size != n:
        raise UsageError(f"expected {n} comma-separated values, got {text!r}")
    return vals


def fmt(x) -> str:
    return format(float(x), ".9g")


def write_csv_atomic(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _prior(target, values) -> GaussianPrior:
    mean = parse_list(values[0], 3)
    std = parse_list(values[1])
    if std.size == 1:
        std = np.repeat(std, 3)
    if std.size != 3:
        raise UsageError("prior standard deviation takes 1 or 3 values")
    if np.any(~(std > 0)):
        raise UsageError("prior standard deviations must be positive")
    return GaussianPrior(target, mean, variances=std**2)


def _print_state(state: NavState, out):
    print("r = " + " ".join(fmt(v) for v in state.r), file=out)
    print("psi = " + " ".join(fmt(v) for v in state.psi), file=out)


def cmd_estimate(args, out) -> int:
    packet = load_packet(args.packet)
    priors = []
    if args.prior_pos:
        priors.append(_prior(Target.POSITION, args.prior_pos))
    if args.prior_ori and args.prior_accel:
        raise UsageError("--prior-ori and --prior-accel both set an orientation prior")
    if args.prior_ori:
        priors.append(_prior(Target.ORIENTATION, args.prior_ori))
    if args.prior_accel:
        if packet.accel is None:
            raise SchemaError("--prior-accel needs accelerometer samples", "accel")
        priors.append(orientation_prior_from_accel(packet.accel, parse_value(args.prior_accel)))
    init = None
    if args.init:
        v = parse_list(args.init, 6)
        init = NavState(v[:3], EulerAngles(*v[3:]))
    res = map_estimate(packet, init, priors) if priors else ml_estimate(packet, init)
    state = res.state
    if args.ref:
        state = resolve_hemisphere(state, parse_list(args.ref, 3))
    _print_state(state, out)
    data_cost = chi2_statistic(packet, state)
    print(f"cost = {fmt(res.cost)}", file=out)
    print(f"p_value = {fmt(chi2_pvalue(data_cost, 3 * len(packet)))}", file=out)
    print(f"iterations = {res.iterations}", file=out)
    print(f"converged = {str(res.converged).lower()}", file=out)
    return EXIT_OK


def _config(args, **extra) -> ExperimentConfig:
    return ExperimentConfig(trials=args.trials, seed=args.seed, **extra)


def cmd_simulate_rmse(args, out) -> int:
    sweep = tuple(parse_list(args.sweep))
    if not sweep or any(not s > 0 for s in sweep):
        raise UsageError("--sweep values must be positive")
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    target = Target.ORIENTATION if args.target == "ori" else Target.POSITION
    cfg = _config(args, prior_sweep=sweep, prior_target=target, hemisphere_reference=args.reference)
    curve = run_rmse_experiment(cfg, workers=args.workers)
    write_csv_atomic(args.out, ["sweep", "ml_rmse", "map_rmse", "crb", "crb_perfect"], curve.rows())
    return EXIT_OK


def cmd_simulate_roc(args, out) -> int:
    if args.trials < 1 or not args.scale > 0:
        raise UsageError("--trials must be >= 1 and --scale positive")
    res = run_roc_experiment(_config(args), h1_noise_scale=args.scale, workers=args.workers)
    rows = []
    for d, pts in res.curves.items():
        rows.extend((d.value, float(f), float(t)) for f, t in pts)
    for d, auc in res.auc.items():
        rows.append(("auc", d.value, float(auc)))
    write_csv_atomic(args.out, ["detector", "fpr", "tpr"], rows)
    for d, auc in res.auc.items():
        print(f"auc[{d.value}] = {fmt(auc)}", file=out)
    return EXIT_OK


def cmd_simulate_fusion(args, out) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    res = run_fusion_experiment(
        _config(args),
        accel_noise_std=args.accel_noise,
        prior_sigma=parse_value(args.prior_sigma),
        workers=args.workers,
    )
    write_csv_atomic(args.out, ["estimator", "error", "ecdf"], res.ecdf())
    print(f"median_ratio = {fmt(res.median_ratio)}", file=out)
    return EXIT_OK


def cmd_crb(args, out) -> int:
    r = parse_list(args.r, 3)
    info = crb_mod.axis_information(r, args.N, args.c, args.m, args.sigma)
    closed = crb_mod.position_fim_closed(r, args.N, args.c, args.m, args.sigma)
    i_range = crb_mod.range_fisher(r, args.N, args.c, args.m, args.sigma)
    for i, v in enumerate(info):
        print(f"I_r{i + 1} = {fmt(v)}", file=out)
    print(f"trace = {fmt(np.trace(closed.matrix))}", file=out)
    print(f"I_range = {fmt(i_range)}", file=out)
    print(f"rmse_bound_position_known_orientation = {fmt(crb_mod.scalar_rmse_bound(closed))}", file=out)
    print(f"range_bound = {fmt(1.0 / math.sqrt(i_range))}", file=out)
    psi = EulerAngles(*parse_list(args.psi, 3)) if args.psi else EulerAngles()
    schedule = MomentSchedule.axis_cycle(args.m, args.N)
    full = crb_mod.full_fim(NavState(r, psi), schedule, args.c, args.sigma**2 * np.eye(3))
    print(f"rmse_bound_position = {fmt(crb_mod.scalar_rmse_bound(full, Target.POSITION))}", file=out)
    print(f"rmse_bound_orientation = {fmt(crb_mod.scalar_rmse_bound(full, Target.ORIENTATION))}", file=out)
    if args.full:
        print("fim =", file=out)
        for row in full.matrix:
            print(" ".join(fmt(v) for v in row), file=out)
    return EXIT_OK


def cmd_detect(args, out) -> int:
    packet = load_packet(args.packet)
    if not 0.0 < args.alpha < 1.0:
        raise UsageError("--alpha must lie in (0, 1)")
    res = detect(packet, Detector(args.detector), alpha=args.alpha, threshold=args.threshold,
                 calibration_trials=args.calibration_trials, seed=args.seed)
    print(f"detector = {res.detector.value}", file=out)
    print(f"statistic = {fmt(res.statistic)}", file=out)
    print(f"threshold = {fmt(res.threshold)}", file=out)
    if res.p_value is not None:
        print(f"p_value = {fmt(res.p_value)}", file=out)
    print(f"reject = {str(res.reject).lower()}", file=out)
    return EXIT_REJECT if res.reject else EXIT_OK


def cmd_simulate_packet(args, out) -> int:
    r = parse_list(args.r, 3)
    psi = EulerAngles(*parse_list(args.psi, 3))
    state = NavState(r, psi)
    if args.N % 3:
        raise UsageError("--N must be a multiple of 3")
    P = args.sigma**2 * np.eye(3)
    rng = np.random.default_rng(args.seed)
    accel = None
    if args.accel_samples:
        accel = simulate_accel(psi, args.accel_samples, args.accel_noise, rng)
    packet = simulate_packet(
        state, MomentSchedule.axis_cycle(args.m, args.N), args.c, P, rng=rng,
        noise_free=args.noise_free, true_cov=args.noise_scale * P, accel=accel,
    )
    dump_packet(packet, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="minav", description="Magneto-inductive navigation toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", help="ML/MAP estimate from a packet file")
    e.add_argument("packet")
    e.add_argument("--prior-pos", nargs=2, metavar=("MEAN", "STD"),
                   help="position prior, e.g. 1,1,1 0.5")
    e.add_argument("--prior-ori", nargs=2, metavar=("MEAN", "STD"),
                   help="Euler-angle prior, e.g. 0,0,0 1deg,1deg,inf")
    e.add_argument("--prior-accel", metavar="STD", help="roll/pitch prior from packet accel samples")
    e.add_argument("--init", help="initial state x,y,z,roll,pitch,yaw")
    e.add_argument("--ref", help="hemisphere reference x,y,z")
    e.set_defaults(func=cmd_estimate)

    def sim_common(sp, trials):
        sp.add_argument("--trials", type=int, default=trials)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", required=True)
        sp.add_argument("--workers", type=int, default=None)

    s = sub.add_parser("simulate-rmse", help="RMSE vs prior uncertainty")
    s.add_argument("--target", choices=("ori", "pos"), default="ori",
                   help="which block carries the prior")
    s.add_argument("--sweep", default="0.01deg,0.1deg,1deg,10deg,1000")
    s.add_argument("--reference", choices=("truth", "prior"), default="truth")
    sim_common(s, 10_000)
    s.set_defaults(func=cmd_simulate_rmse)

    s = sub.add_parser("simulate-roc", help="detector ROC under inflated noise")
    s.add_argument("--scale", type=float, default=2.0)
    sim_common(s, 100_000)
    s.set_defaults(func=cmd_simulate_roc)

    s = sub.add_parser("simulate-fusion", help="accelerometer fusion ECDF")
    s.add_argument("--accel-noise", type=float, default=0.05)
    s.add_argument("--prior-sigma", default="0.1deg")
    sim_common(s, 10_000)
    s.set_defaults(func=cmd_simulate_fusion)

    c = sub.add_parser("crb", help="Fisher information and Cramer-Rao bounds")
    c.add_argument("--r", required=True)
    c.add_argument("--N", type=int, default=30)
    c.add_argument("--c", type=float, default=1.0)
    c.add_argument("--m", type=float, default=1.0)
    c.add_argument("--sigma", type=float, default=0.1)
    c.add_argument("--psi")
    c.add_argument("--full", action="store_true")
    c.set_defaults(func=cmd_crb)

    d = sub.add_parser("detect", help="distortion detection on a packet file")
    d.add_argument("packet")
    d.add_argument("--detector", choices=[x.value for x in Detector], default="chi2")
    d.add_argument("--alpha", type=float, default=0.05)
    d.add_argument("--threshold", type=float, default=None)
    d.add_argument("--calibration-trials", type=int, default=2000)
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_detect)

    g = sub.add_parser("simulate-packet", help="write a synthetic packet file")
    g.add_argument("--r", default="1,1,1")
    g.add_argument("--psi", default="0,0,0")
    g.add_argument("--c", type=float, default=1.0)
    g.add_argument("--m", type=float, default=1.0)
    g.add_argument("--N", type=int, default=30)
    g.add_argument("--sigma", type=float, default=0.1)
    g.add_argument("--noise-scale", type=float, default=1.0,
                   help="draw noise with this multiple of the recorded covariance")
    g.add_argument("--noise-free", action="store_true")
    g.add_argument("--accel-samples", type=int, default=0)
    g.add_argument("--accel-noise", type=float, default=0.05)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_simulate_packet)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except (UsageError, SchemaError, BadConfig, InvalidPrior) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EstimationError, MinavError, np.linalg.LinAlgError) as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
