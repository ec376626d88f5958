"""Point-dipole field model with analytic derivatives, plus packet simulation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateRange, SchemaError
from .geom import NavState, euler_to_rotation, rotation_derivatives

MIN_RANGE = 1e-9


@dataclass(frozen=True)
class MomentSchedule:
    """Transmitted moments, one 3-vector (transmitter frame) per sample."""

    moments: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.moments, dtype=float)
        if m.ndim != 2 or m.shape[1] != 3 or m.shape[0] == 0:
            raise ValueError("moments must have shape (N, 3) with N >= 1")
        if np.any(np.all(m == 0.0, axis=1)):
            raise ValueError("moments must be nonzero")
        m.setflags(write=False)
        object.__setattr__(self, "moments", m)

    def __len__(self):
        return self.moments.shape[0]

    @classmethod
    def axis_cycle(cls, m: float, n: int) -> MomentSchedule:
        """``[m,0,0], [0,m,0], [0,0,m]`` repeated; ``n`` must be a multiple of 3."""
        if n <= 0 or n % 3:
            raise ValueError(f"axis cycle length must be a positive multiple of 3, got {n}")
        return cls(np.tile(m * np.eye(3), (n // 3, 1)))

    def axis_cycle_magnitude(self) -> Optional[float]:
        """Return ``m`` if this schedule is an axis cycle, else ``None``."""
        n = len(self)
        if n % 3:
            return None
        m = self.moments[0, 0]
        if m == 0.0 or not np.array_equal(self.moments, np.tile(m * np.eye(3), (n // 3, 1))):
            return None
        return float(m)


@dataclass
class MeasurementPacket:
    """One MI transmission.

    ``noise_cov`` is a single 3x3 covariance shared by every sample, or an
    ``(N, 3, 3)`` stack after per-sample rotation stabilization.
    ``gyro_deltas`` holds the orientation change of each sample relative to
    the first one (so the first row is zero).
    """

    c: float
    schedule: MomentSchedule
    readings: np.ndarray
    noise_cov: np.ndarray
    gyro_deltas: Optional[np.ndarray] = None
    accel: Optional[np.ndarray] = None
    _whitener: Optional[np.ndarray] = field(default=None, init=False, repr=False, compare=False)
    _white_scale: Optional[float] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.c = float(self.c)
        self.readings = np.asarray(self.readings, dtype=float)
        self.noise_cov = np.asarray(self.noise_cov, dtype=float)
        n = len(self.schedule)
        if self.readings.shape != (n, 3):
            raise SchemaError(
                f"expected {n} readings of length 3, got shape {self.readings.shape}", "readings"
            )
        if self.noise_cov.shape not in ((3, 3), (n, 3, 3)):
            raise SchemaError(f"bad shape {self.noise_cov.shape}", "noise_cov")
        if not np.allclose(self.noise_cov, np.swapaxes(self.noise_cov, -1, -2), rtol=0, atol=1e-12):
            raise SchemaError("noise covariance must be symmetric", "noise_cov")
        try:
            np.linalg.cholesky(self.noise_cov)
        except np.linalg.LinAlgError:
            raise SchemaError("noise covariance must be positive definite", "noise_cov") from None
        if self.gyro_deltas is not None:
            self.gyro_deltas = np.asarray(self.gyro_deltas, dtype=float)
            if self.gyro_deltas.shape != (n, 3):
                raise SchemaError(f"expected shape ({n}, 3)", "gyro_deltas")
        if self.accel is not None:
            self.accel = np.asarray(self.accel, dtype=float).reshape(-1, 3)

    def __len__(self):
        return len(self.schedule)

    @property
    def moments(self) -> np.ndarray:
        return self.schedule.moments

    @property
    def whitener(self) -> np.ndarray:
        """``L^-1`` with ``P = L L^T``; maps residuals to unit covariance.

        Shape ``(3, 3)`` or ``(N, 3, 3)`` following ``noise_cov``.
        """
        if self._whitener is None:
            L = np.linalg.cholesky(self.noise_cov)
            self._whitener = np.linalg.inv(L)
            if self._whitener.ndim == 2 and _is_scaled_identity(self._whitener):
                self._white_scale = float(self._whitener[0, 0])
        return self._whitener

    def whiten(self, v: np.ndarray) -> np.ndarray:
        """Apply the whitener to ``(N, 3)`` vectors or ``(N, 3, k)`` Jacobians."""
        W = self.whitener
        if self._white_scale is not None:
            return self._white_scale * v
        if W.ndim == 2:
            return np.einsum("ij,nj...->ni...", W, v)
        return np.einsum("nij,nj...->ni...", W, v)


def _is_scaled_identity(W):
    return W[0, 0] > 0 and np.array_equal(W, W[0, 0] * np.eye(3))


def _check_range(r: np.ndarray) -> float:
    rho = float(np.sqrt(r @ r))
    if not rho >= MIN_RANGE:
        raise DegenerateRange(f"range {rho:g} m is below {MIN_RANGE:g} m")
    return rho


def transmitter_field(r, m, c: float) -> np.ndarray:
    """Dipole field expressed in the transmitter frame (no receiver rotation)."""
    r = np.asarray(r, dtype=float)
    m = np.asarray(m, dtype=float)
    rho = _check_range(r)
    rho2 = rho * rho
    s = m @ r
    return (c / rho**3) * (3.0 * np.multiply.outer(s, r) / rho2 - m)


def dipole_field(state: NavState, m, c: float) -> np.ndarray:
    """Field sensed by the receiver for moment(s) ``m`` of shape (3,) or (N, 3)."""
    b = transmitter_field(state.r, m, c)
    return b @ state.rotation.T


def position_jacobian(state: NavState, m, c: float) -> np.ndarray:
    """d h / d r, shape (3, 3) or (N, 3, 3)."""
    r = state.r
    m = np.asarray(m, dtype=float)
    rho = _check_range(r)
    rho2 = rho * rho
    s = m @ r
    rr = np.outer(r, r)
    A = (
        s[..., None, None] * np.eye(3)
        + np.multiply.outer(m, r).swapaxes(-1, -2)  # r m^T
        + np.multiply.outer(m, r)  # m r^T
        - (5.0 * s / rho2)[..., None, None] * rr
    )
    return (3.0 * c / rho**5) * np.einsum("ij,...jk->...ik", state.rotation, A)


def orientation_jacobian(state: NavState, m, c: float) -> np.ndarray:
    """d h / d (roll, pitch, yaw), shape (3, 3) or (N, 3, 3)."""
    b = transmitter_field(state.r, m, c)
    dR = np.stack(rotation_derivatives(state.psi))  # (angle, 3, 3)
    return np.einsum("aij,...j->...ia", dR, b)


def range_derivative(state: NavState, m, c: float) -> np.ndarray:
    """d h / d ||r|| along a fixed direction."""
    rho = _check_range(state.r)
    return (-3.0 / rho) * dipole_field(state, m, c)


def field_and_jacobian(state: NavState, moments: np.ndarray, c: float):
    """Field ``(N, 3)`` and full-state Jacobian ``(N, 3, 6)`` in one pass."""
    return field_and_jacobian_raw(state.r, state.psi, moments, c)


def field_and_jacobian_raw(r: np.ndarray, psi, moments: np.ndarray, c: float):
    """Same as :func:`field_and_jacobian` on a bare position vector and angles."""
    b = transmitter_field(r, moments, c)
    rho = _check_range(r)
    rho2 = rho * rho
    s = moments @ r
    R = euler_to_rotation(psi)
    rx, ry, rz = rotation_derivatives(psi)
    h = b @ R.T
    J = np.empty((moments.shape[0], 3, 6))
    # position block: 3c/rho^5 R (s I + r m^T + m r^T - 5 s/rho^2 r r^T)
    Rr = R @ r
    Rm = moments @ R.T
    J[:, :, :3] = (3.0 * c / (rho2 * rho2 * rho)) * (
        s[:, None, None] * R
        + Rr[None, :, None] * moments[:, None, :]
        + Rm[:, :, None] * r[None, None, :]
        - (5.0 * s / rho2)[:, None, None] * np.outer(Rr, r)[None]
    )
    J[:, :, 3] = b @ rx.T
    J[:, :, 4] = b @ ry.T
    J[:, :, 5] = b @ rz.T
    return h, J


def simulate_packet(
    state: NavState,
    schedule: MomentSchedule,
    c: float,
    P,
    seed=None,
    *,
    rng: Optional[np.random.Generator] = None,
    noise_free: bool = False,
    true_cov=None,
    gyro_deltas=None,
    accel=None,
) -> MeasurementPacket:
    """Draw ``y_k = h_{m_k}(x) + e_k`` with ``e_k ~ N(0, P)``.

    ``true_cov`` overrides the covariance actually used to draw the noise
    while the packet still records ``P`` (used to simulate a mismatched
    model). With ``gyro_deltas`` the receiver is rotated by ``R(phi_k)``
    relative to ``state`` at sample ``k``.
    """
    P = np.asarray(P, dtype=float)
    h = dipole_field(state, schedule.moments, c)
    n = len(schedule)
    if gyro_deltas is not None:
        gyro_deltas = np.asarray(gyro_deltas, dtype=float).reshape(n, 3)
        h = np.stack([euler_to_rotation(phi) @ hk for phi, hk in zip(gyro_deltas, h)])
    if noise_free:
        y = h
    else:
        if rng is None:
            rng = np.random.default_rng(seed)
        cov = P if true_cov is None else np.asarray(true_cov, dtype=float)
        L = np.linalg.cholesky(cov)
        y = h + rng.standard_normal((n, 3)) @ L.T
    return MeasurementPacket(
        c=c, schedule=schedule, readings=y, noise_cov=P, gyro_deltas=gyro_deltas, accel=accel
    )

