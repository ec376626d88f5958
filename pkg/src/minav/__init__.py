"""Magneto-inductive navigation toolkit."""

from .baseline import baseline_estimate
from .crb import full_fim, position_fim_closed, range_fisher, scalar_rmse_bound
from .detect import chi2_pvalue, chi2_statistic, detect, eigenvalue_criterion, roc_curve
from .dipole import MeasurementPacket, MomentSchedule, dipole_field, simulate_packet
from .estimators import GaussianPrior, Target, map_estimate, ml_estimate, resolve_hemisphere
from .geom import EulerAngles, NavState, angle_residual, euler_to_rotation, rotation_to_euler

__all__ = [
    "EulerAngles",
    "GaussianPrior",
    "MeasurementPacket",
    "MomentSchedule",
    "NavState",
    "Target",
    "angle_residual",
    "baseline_estimate",
    "chi2_pvalue",
    "chi2_statistic",
    "detect",
    "dipole_field",
    "eigenvalue_criterion",
    "euler_to_rotation",
    "full_fim",
    "map_estimate",
    "ml_estimate",
    "position_fim_closed",
    "range_fisher",
    "resolve_hemisphere",
    "roc_curve",
    "rotation_to_euler",
    "scalar_rmse_bound",
    "simulate_packet",
]
