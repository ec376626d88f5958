"""Monte-Carlo experiment drivers.

Every trial draws from its own generator seeded by ``(seed, stream, trial)``,
so results do not depend on the number of worker processes.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional, Sequence

import numpy as np

from .baseline import baseline_estimate, estimate_channel
from .crb import add_prior_information, full_fim, known_block_bound, scalar_rmse_bound
from .detect import (
    Detector,
    chi2_statistic,
    eigenvalue_criterion,
    normalized_statistic,
    roc_curve,
)
from .dipole import MomentSchedule, simulate_packet
from .errors import EstimationError, ExperimentFailed, MinavError
from .estimators import (
    GaussianPrior,
    Target,
    map_estimate,
    ml_estimate,
    orientation_prior_from_accel,
    resolve_hemisphere,
    simulate_accel,
)
from .geom import EulerAngles, NavState, angle_residual

log = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.01

_STREAM_RMSE = 0
_STREAM_ROC = 1
_STREAM_FUSION = 3


def _default_truth() -> NavState:
    return NavState(np.array([1.0, 1.0, 1.0]), EulerAngles(0.0, 0.0, 0.0))


def _default_schedule() -> MomentSchedule:
    return MomentSchedule.axis_cycle(1.0, 30)


@dataclass
class ExperimentConfig:
    """Simulation setup; defaults reproduce the reference configuration."""

    truth: NavState = field(default_factory=_default_truth)
    c: float = 1.0
    schedule: MomentSchedule = field(default_factory=_default_schedule)
    sigma: float = 0.1
    trials: int = 10_000
    seed: int = 0
    prior_sweep: Sequence[float] = (math.radians(0.01), math.radians(0.1), math.radians(1.0),
                                    math.radians(10.0), 1e3)
    prior_target: Target = Target.ORIENTATION
    hemisphere_reference: str = "truth"

    def __post_init__(self):
        self.prior_target = Target(self.prior_target)
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if any(not (s > 0) for s in self.prior_sweep):
            raise ValueError("prior sweep values must be positive")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.hemisphere_reference not in ("truth", "prior"):
            raise ValueError("hemisphere_reference must be 'truth' or 'prior'")

    @property
    def noise_cov(self) -> np.ndarray:
        return self.sigma**2 * np.eye(3)


def worker_count(workers: Optional[int] = None) -> int:
    if workers is None:
        env = os.environ.get("MINAV_THREADS")
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(workers))


def run_trials(fn: Callable[[int], object], n: int, workers: Optional[int] = None) -> list:
    """Evaluate ``fn(t)`` for ``t in range(n)``, results ordered by ``t``."""
    workers = min(worker_count(workers), n)
    if workers == 1:
        return [fn(t) for t in range(n)]
    chunk = max(1, n // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n), chunksize=chunk))


def _trial_rng(seed: int, stream: int, t: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream, t])


def _check_failures(failures: int, trials: int, what: str):
    if failures:
        log.warning("%s: %d of %d trials failed", what, failures, trials)
    if failures >= MAX_FAILURE_RATE * trials and failures:
        raise ExperimentFailed(f"{what}: {failures} of {trials} trials failed")


def _rmse(sq: np.ndarray) -> tuple[float, float]:
    """RMSE from per-trial squared errors and its delta-method standard error."""
    q = sq / 3.0
    rmse = math.sqrt(q.mean())
    if q.size < 2 or rmse == 0.0:
        return rmse, 0.0
    return rmse, float(q.std(ddof=1) / math.sqrt(q.size) / (2.0 * rmse))


# --- RMSE vs prior uncertainty -------------------------------------------


@dataclass
class RmseCurve:
    """RMSE of the block *not* carrying the prior, per sweep value."""

    prior_target: Target
    block: Target
    sweep: np.ndarray
    ml_rmse: float
    ml_rmse_se: float
    map_rmse: np.ndarray
    map_rmse_se: np.ndarray
    crb: np.ndarray
    crb_perfect_prior: float
    crb_no_prior: float
    trials: int
    failures: int = 0

    def rows(self):
        for i, s in enumerate(self.sweep):
            yield (s, self.ml_rmse, self.map_rmse[i], self.crb[i], self.crb_perfect_prior)


def _errors(est: NavState, truth: NavState, reference) -> tuple[np.ndarray, np.ndarray]:
    est = resolve_hemisphere(est, reference)
    return est.r - truth.r, angle_residual(np.array(est.psi), np.array(truth.psi))


def _rmse_trial(config: ExperimentConfig, t: int):
    rng = _trial_rng(config.seed, _STREAM_RMSE, t)
    truth = config.truth
    packet = simulate_packet(truth, config.schedule, config.c, config.noise_cov, rng=rng)
    target = config.prior_target
    truth_block = truth.r if target is Target.POSITION else np.array(truth.psi)
    means = [truth_block + s * rng.standard_normal(3) for s in config.prior_sweep]
    try:
        init = baseline_estimate(packet)
        ml = ml_estimate(packet, init).state
        ml_err = _errors(ml, truth, truth.r)
        map_errs = []
        for s, mean in zip(config.prior_sweep, means):
            prior = GaussianPrior.isotropic(target, mean, s)
            start = resolve_hemisphere(init, mean) if target is Target.POSITION else init
            est = map_estimate(packet, start, [prior]).state
            use_prior = config.hemisphere_reference == "prior" and target is Target.POSITION
            map_errs.append(_errors(est, truth, mean if use_prior else truth.r))
    except (EstimationError, MinavError) as exc:
        log.debug("rmse trial %d failed: %s", t, exc)
        return None
    return ml_err, map_errs


def run_rmse_experiment(config: ExperimentConfig, workers: Optional[int] = None) -> RmseCurve:
    results = run_trials(partial(_rmse_trial, config), config.trials, workers)
    ok = [r for r in results if r is not None]
    failures = len(results) - len(ok)
    _check_failures(failures, config.trials, "rmse experiment")
    block_idx = 1 if config.prior_target is Target.POSITION else 0
    block = Target.ORIENTATION if block_idx else Target.POSITION

    ml_sq = np.array([np.sum(r[0][block_idx] ** 2) for r in ok])
    ml_rmse, ml_se = _rmse(ml_sq)
    map_rmse, map_se = [], []
    for i in range(len(config.prior_sweep)):
        sq = np.array([np.sum(r[1][i][block_idx] ** 2) for r in ok])
        rm, se = _rmse(sq)
        map_rmse.append(rm)
        map_se.append(se)

    fim = full_fim(config.truth, config.schedule, config.c, config.noise_cov)
    truth_block = config.truth.r if config.prior_target is Target.POSITION else config.truth.psi
    crb = [
        scalar_rmse_bound(
            add_prior_information(fim, [GaussianPrior.isotropic(config.prior_target, truth_block, s)]),
            block,
        )
        for s in config.prior_sweep
    ]
    return RmseCurve(
        prior_target=config.prior_target,
        block=block,
        sweep=np.asarray(config.prior_sweep, dtype=float),
        ml_rmse=ml_rmse,
        ml_rmse_se=ml_se,
        map_rmse=np.array(map_rmse),
        map_rmse_se=np.array(map_se),
        crb=np.array(crb),
        crb_perfect_prior=known_block_bound(fim, block),
        crb_no_prior=scalar_rmse_bound(fim, block),
        trials=config.trials,
        failures=failures,
    )


# --- detector ROC ---------------------------------------------------------

ROC_DETECTORS = (Detector.CHI_SQUARED, Detector.NORMALIZED, Detector.EIGENVALUE)


@dataclass
class RocResult:
    scores_h0: dict
    scores_h1: dict
    curves: dict
    auc: dict
    failures: int = 0


def _roc_trial(config: ExperimentConfig, scale: float, hypothesis: int, t: int):
    rng = _trial_rng(config.seed, _STREAM_ROC + hypothesis, t)
    P = config.noise_cov
    true_cov = scale * P if hypothesis else P
    packet = simulate_packet(config.truth, config.schedule, config.c, P, rng=rng, true_cov=true_cov)
    try:
        eig = eigenvalue_criterion(estimate_channel(packet))
        est = ml_estimate(packet).state
        return chi2_statistic(packet, est), normalized_statistic(packet, est), eig
    except (EstimationError, MinavError) as exc:
        log.debug("roc trial %d/%d failed: %s", hypothesis, t, exc)
        return None


def _roc_population(config: ExperimentConfig, scale: float, hypothesis: int, workers):
    res = run_trials(partial(_roc_trial, config, scale, hypothesis), config.trials, workers)
    ok = np.array([r for r in res if r is not None], dtype=float).reshape(-1, 3)
    return ok, len(res) - ok.shape[0]


def run_roc_sweep(
    config: ExperimentConfig, scales: Sequence[float], workers: Optional[int] = None
) -> dict:
    """ROC for several H1 noise scales against one shared H0 population."""
    if any(not s > 0 for s in scales):
        raise ValueError("noise scale must be positive")
    h0, h0_fail = _roc_population(config, 1.0, 0, workers)
    out = {}
    for scale in scales:
        h1, h1_fail = _roc_population(config, scale, 1, workers)
        failures = h0_fail + h1_fail
        _check_failures(failures, 2 * config.trials, "roc experiment")
        scores_h0 = {d: h0[:, i] for i, d in enumerate(ROC_DETECTORS)}
        scores_h1 = {d: h1[:, i] for i, d in enumerate(ROC_DETECTORS)}
        curves, auc = {}, {}
        for d in ROC_DETECTORS:
            curves[d], auc[d] = roc_curve(scores_h0[d], scores_h1[d])
        out[scale] = RocResult(scores_h0, scores_h1, curves, auc, failures)
    return out


def run_roc_experiment(
    config: ExperimentConfig, h1_noise_scale: float = 2.0, workers: Optional[int] = None
) -> RocResult:
    """Score fault-free packets (H0) against packets with inflated noise (H1)."""
    return run_roc_sweep(config, (h1_noise_scale,), workers)[h1_noise_scale]


# --- accelerometer fusion -------------------------------------------------


@dataclass
class FusionResult:
    ml_errors: np.ndarray
    map_errors: np.ndarray
    failures: int = 0

    @property
    def median_ratio(self) -> float:
        return float(np.median(self.map_errors) / np.median(self.ml_errors))

    def ecdf(self):
        """``(estimator, error, probability)`` rows, errors ascending."""
        rows = []
        for name, errs in (("ml", self.ml_errors), ("map", self.map_errors)):
            e = np.sort(errs)
            p = np.arange(1, e.size + 1) / e.size
            rows.extend((name, float(x), float(q)) for x, q in zip(e, p))
        return rows


def _fusion_trial(config: ExperimentConfig, accel_noise_std: float, prior_sigma: float,
                  n_accel: int, t: int):
    rng = _trial_rng(config.seed, _STREAM_FUSION, t)
    truth = config.truth
    accel = simulate_accel(truth.psi, n_accel, accel_noise_std, rng)
    packet = simulate_packet(truth, config.schedule, config.c, config.noise_cov, rng=rng, accel=accel)
    try:
        init = baseline_estimate(packet)
        prior = orientation_prior_from_accel(packet.accel, prior_sigma)
        ml = resolve_hemisphere(ml_estimate(packet, init).state, truth.r)
        fused = resolve_hemisphere(map_estimate(packet, init, [prior]).state, truth.r)
    except (EstimationError, MinavError) as exc:
        log.debug("fusion trial %d failed: %s", t, exc)
        return None
    return float(np.linalg.norm(ml.r - truth.r)), float(np.linalg.norm(fused.r - truth.r))


def run_fusion_experiment(
    config: ExperimentConfig,
    accel_noise_std: float = 0.05,
    prior_sigma: float = math.radians(0.1),
    n_accel: int = 100,
    workers: Optional[int] = None,
) -> FusionResult:
    """3-D position errors of ML vs MAP with an accelerometer roll/pitch prior."""
    fn = partial(_fusion_trial, config, accel_noise_std, prior_sigma, n_accel)
    res = run_trials(fn, config.trials, workers)
    ok = np.array([r for r in res if r is not None], dtype=float).reshape(-1, 2)
    failures = len(res) - ok.shape[0]
    _check_failures(failures, config.trials, "fusion experiment")
    return FusionResult(ok[:, 0], ok[:, 1], failures)
