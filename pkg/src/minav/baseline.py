"""Closed-form position/orientation estimator.

Pipeline: gyro de-rotation -> least-squares channel matrix -> RSSI range
-> dominant Gramian eigenvector (direction) -> polar factor of ``U S^T``
(orientation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dipole import MeasurementPacket
from .errors import (
    DegenerateGramian,
    MissingGyro,
    RankDeficient,
    UnsupportedSchedule,
    ZeroChannel,
)
from .geom import NavState, euler_to_rotation, rotation_to_euler
from .linalg import polar_factor, symmetric_eig3


@dataclass(frozen=True)
class ChannelMatrix:
    """Columns are the received fields for unit moments along each transmitter axis."""

    S_hat: np.ndarray

    def __post_init__(self):
        S = np.asarray(self.S_hat, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(S)):
            raise ValueError("channel matrix must be finite")
        object.__setattr__(self, "S_hat", S)

    @property
    def gramian(self) -> np.ndarray:
        return self.S_hat.T @ self.S_hat


def rotation_stabilize(packet: MeasurementPacket) -> MeasurementPacket:
    """Undo per-sample receiver rotations: ``z_k = R(phi_k)^T y_k``."""
    if packet.gyro_deltas is None:
        raise MissingGyro("packet has no gyro deltas")
    Rs = np.stack([euler_to_rotation(phi) for phi in packet.gyro_deltas])
    z = np.einsum("nji,nj->ni", Rs, packet.readings)
    P = packet.noise_cov
    isotropic = P.ndim == 2 and np.array_equal(P, P[0, 0] * np.eye(3))
    if isotropic:
        cov = P
    else:
        Pk = np.broadcast_to(P, Rs.shape)
        cov = np.einsum("nji,njk,nkl->nil", Rs, Pk, Rs)
        cov = 0.5 * (cov + np.swapaxes(cov, 1, 2))
    return MeasurementPacket(
        c=packet.c,
        schedule=packet.schedule,
        readings=z,
        noise_cov=cov,
        gyro_deltas=np.zeros_like(packet.gyro_deltas),
        accel=packet.accel,
    )


def estimate_channel(packet: MeasurementPacket) -> ChannelMatrix:
    """Linear least-squares channel estimate.

    For an axis-cycled schedule this is the per-axis average of the readings
    divided by the moment magnitude. Other schedules fall back to solving
    ``Y = M S^T`` by least squares.
    """
    m = packet.schedule.axis_cycle_magnitude()
    y = packet.readings
    if m is not None:
        cols = [y[j::3].mean(axis=0) / m for j in range(3)]
        return ChannelMatrix(np.column_stack(cols))
    M = packet.moments
    if np.linalg.matrix_rank(M) < 3:
        raise UnsupportedSchedule("moment schedule does not span three axes")
    St, *_ = np.linalg.lstsq(M, y, rcond=None)
    return ChannelMatrix(St.T)


def rssi(channel: ChannelMatrix) -> float:
    """``20 log10 ||S||_F`` in dB."""
    norm = float(np.linalg.norm(channel.S_hat))
    if norm == 0.0:
        raise ZeroChannel("channel matrix is zero")
    return 20.0 * math.log10(norm)


def reference_rssi(c: float, r0: float = 1.0) -> float:
    """Noise-free RSSI at range ``r0``: ``||S||_F^2 = 6 c^2 / r0^6``."""
    return 20.0 * math.log10(math.sqrt(6.0) * abs(c) / r0**3)


def range_from_rssi(rho: float, rho0: float, r0: float) -> float:
    if not r0 > 0:
        raise ValueError("reference range must be positive")
    return r0 * 10.0 ** ((rho0 - rho) / 60.0)


def direction_from_channel(channel: ChannelMatrix, tie_tol: float = 1e-12) -> np.ndarray:
    """Dominant eigenvector of ``S^T S``; sign fixed so its largest entry is positive."""
    w, V = symmetric_eig3(channel.gramian)
    if w[0] - w[1] <= tie_tol * abs(w[0]):
        raise DegenerateGramian("top Gramian eigenvalues coincide; direction undefined")
    u = V[:, 0]
    u = u / np.linalg.norm(u)
    if u[np.argmax(np.abs(u))] < 0:
        u = -u
    return u


def orientation_from_channel(channel: ChannelMatrix, u_max) -> np.ndarray:
    """Rotation estimate from the polar factor of ``(3 u u^T - I) S^T``.

    With ``S = R D`` and ``D`` symmetric, ``U S^T = (positive definite) R^T``,
    so the polar factor is ``R^T`` under this package's frame convention and
    is transposed before returning.
    """
    u = np.asarray(u_max, dtype=float)
    U = 3.0 * np.outer(u, u) - np.eye(3)
    A = U @ channel.S_hat.T
    sv = np.linalg.svd(A, compute_uv=False)
    if not sv[-1] >= 1e-12 * sv[0]:
        raise RankDeficient("U S^T is rank deficient")
    Q = polar_factor(A)
    Q = Q / np.sign(np.linalg.det(Q))
    return Q.T


def baseline_estimate(
    packet: MeasurementPacket, rho0: Optional[float] = None, r0: float = 1.0
) -> NavState:
    """Closed-form estimate; ``rho0`` defaults to the model value at ``r0``."""
    if packet.gyro_deltas is not None:
        packet = rotation_stabilize(packet)
    channel = estimate_channel(packet)
    if rho0 is None:
        rho0 = reference_rssi(packet.c, r0)
    dist = range_from_rssi(rssi(channel), rho0, r0)
    u = direction_from_channel(channel)
    R = orientation_from_channel(channel, u)
    return NavState(dist * u, rotation_to_euler(R))
