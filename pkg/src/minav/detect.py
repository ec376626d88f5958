"""Distortion detectors and empirical ROC curves."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .baseline import ChannelMatrix, estimate_channel
from .dipole import MeasurementPacket, simulate_packet
from .errors import ZeroChannel, ZeroSignal
from .estimators import mi_cost, ml_estimate
from .geom import NavState
from .linalg import symmetric_eig3

IDEAL_SPECTRUM = np.array([2.0, 0.5, 0.5])

_MAX_ITER = 10_000
_TINY = 1e-300


class Detector(enum.Enum):
    CHI_SQUARED = "chi2"
    NORMALIZED = "norm"
    EIGENVALUE = "eig"


@dataclass(frozen=True)
class DetectionResult:
    statistic: float
    threshold: float
    reject: bool
    detector: Detector
    p_value: Optional[float] = None


def _gamma_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by its power series."""
    term = total = 1.0 / a
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cont_frac(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by modified Lentz continued fraction."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_gamma_q(a: float, x: float) -> float:
    if x <= 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cont_frac(a, x)


def chi2_pvalue(statistic: float, dof: int) -> float:
    """Upper tail ``1 - F(statistic)`` of the chi-squared distribution."""
    if dof < 1:
        raise ValueError("dof must be at least 1")
    if statistic < 0:
        raise ValueError("statistic must be non-negative")
    return min(1.0, max(0.0, regularized_gamma_q(0.5 * dof, 0.5 * statistic)))


def chi2_threshold(alpha: float, dof: int) -> float:
    """Statistic value whose upper-tail probability is ``alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    lo, hi = 0.0, float(dof)
    while chi2_pvalue(hi, dof) > alpha:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi2_pvalue(mid, dof) > alpha:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * hi:
            break
    return 0.5 * (lo + hi)


def chi2_statistic(packet: MeasurementPacket, state: NavState) -> float:
    """Whitened sum of squared residuals at ``state``."""
    return mi_cost(packet, state)


def normalized_statistic(packet: MeasurementPacket, state: NavState) -> float:
    """Chi-squared statistic divided by the total received energy."""
    energy = float(np.sum(packet.readings**2))
    if energy == 0.0:
        raise ZeroSignal("all readings are zero")
    return chi2_statistic(packet, state) / energy


def normalized_spectrum(channel: ChannelMatrix) -> np.ndarray:
    w, _ = symmetric_eig3(channel.gramian)
    mean = w.mean()
    if not mean > 0:
        raise ZeroChannel("channel matrix is zero")
    return w / mean


def eigenvalue_criterion(channel: ChannelMatrix) -> float:
    """Distance of the normalized Gramian spectrum from ``[2, 1/2, 1/2]``."""
    return float(np.linalg.norm(normalized_spectrum(channel) - IDEAL_SPECTRUM))


def roc_curve(scores_h0, scores_h1):
    """Exact empirical ROC: one point per distinct pooled score.

    A sample is flagged when its score is strictly above the threshold.
    Returns ``(points, auc)`` where ``points`` is an ``(n, 2)`` array of
    ``(fpr, tpr)`` running from (0, 0) to (1, 1).
    """
    h0 = np.sort(np.asarray(scores_h0, dtype=float))
    h1 = np.sort(np.asarray(scores_h1, dtype=float))
    if h0.size == 0 or h1.size == 0:
        raise ValueError("both score sets must be nonempty")
    thresholds = np.unique(np.concatenate([h0, h1]))[::-1]
    fpr = 1.0 - np.searchsorted(h0, thresholds, side="right") / h0.size
    tpr = 1.0 - np.searchsorted(h1, thresholds, side="right") / h1.size
    fpr = np.concatenate([fpr, [1.0]])
    tpr = np.concatenate([tpr, [1.0]])
    points = np.column_stack([fpr, tpr])
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) * 0.5))
    return points, auc


def label_faults(position_errors, limit: float = 1.0) -> np.ndarray:
    """Ground-truth fault labels for field data: position error above ``limit`` metres."""
    return np.asarray(position_errors, dtype=float) > limit


def compute_statistic(packet: MeasurementPacket, detector, state: Optional[NavState] = None) -> float:
    detector = Detector(detector)
    if detector is Detector.EIGENVALUE:
        return eigenvalue_criterion(estimate_channel(packet))
    if state is None:
        state = ml_estimate(packet).state
    if detector is Detector.CHI_SQUARED:
        return chi2_statistic(packet, state)
    return normalized_statistic(packet, state)


def calibrate_threshold(
    packet: MeasurementPacket,
    state: NavState,
    detector,
    alpha: float,
    trials: int = 2000,
    seed: int = 0,
) -> float:
    """Monte-Carlo ``1 - alpha`` quantile of a statistic under the fault-free model.

    Packets are redrawn at ``state`` with the packet's own schedule, scale
    factor and noise covariance.
    """
    scores = np.empty(trials)
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        sim = simulate_packet(state, packet.schedule, packet.c, packet.noise_cov, rng=rng)
        scores[t] = compute_statistic(sim, detector)
    return float(np.quantile(scores, 1.0 - alpha, method="higher"))


def detect(
    packet: MeasurementPacket,
    detector="chi2",
    alpha: float = 0.05,
    state: Optional[NavState] = None,
    threshold: Optional[float] = None,
    dof: Optional[int] = None,
    calibration_trials: int = 2000,
    seed: int = 0,
) -> DetectionResult:
    """Run one detector on a packet.

    The chi-squared threshold comes from the chi-squared distribution with
    ``dof`` degrees of freedom (default ``3N``; evaluating at an estimate
    rather than the truth lowers the effective dof by up to 6). The other
    detectors have no reference distribution, so unless ``threshold`` is
    given it is calibrated by simulation at the estimated state.
    """
    detector = Detector(detector)
    if state is None and detector is not Detector.EIGENVALUE:
        state = ml_estimate(packet).state
    stat = compute_statistic(packet, detector, state)
    p_value = None
    if detector is Detector.CHI_SQUARED:
        dof = 3 * len(packet) if dof is None else dof
        p_value = chi2_pvalue(stat, dof)
        if threshold is None:
            threshold = chi2_threshold(alpha, dof)
    elif threshold is None:
        if state is None:
            state = ml_estimate(packet).state
        threshold = calibrate_threshold(packet, state, detector, alpha, calibration_trials, seed)
    return DetectionResult(stat, float(threshold), bool(stat > threshold), detector, p_value)
