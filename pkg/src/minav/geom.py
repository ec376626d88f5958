"""Euler-angle rotation helpers.

Convention: ``R(psi) = Rx(roll) @ Ry(pitch) @ Rz(yaw)`` maps vectors expressed
in the transmitter frame into the receiver frame (a frame rotation, so
``Rz(pi/2) @ [1, 0, 0] = [0, -1, 0]``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import NotARotation

_GIMBAL_TOL = 1e-10


class EulerAngles(NamedTuple):
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    def normalized(self) -> EulerAngles:
        """Canonical angles describing the same rotation."""
        return rotation_to_euler(euler_to_rotation(self))


@dataclass(frozen=True)
class NavState:
    """Receiver position (m) and orientation relative to the transmitter."""

    r: np.ndarray
    psi: EulerAngles = EulerAngles()

    def __post_init__(self):
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float).reshape(3))
        object.__setattr__(self, "psi", EulerAngles(*map(float, self.psi)))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.r, self.psi])

    @classmethod
    def from_vector(cls, x) -> NavState:
        x = np.asarray(x, dtype=float)
        return cls(x[:3].copy(), EulerAngles(*x[3:6]))

    @property
    def rotation(self) -> np.ndarray:
        return euler_to_rotation(self.psi)


def _rx(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])


def _ry(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def _rz(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def _drx(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[0.0, 0.0, 0.0], [0.0, -s, c], [0.0, -c, -s]])


def _dry(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[-s, 0.0, -c], [0.0, 0.0, 0.0], [c, 0.0, -s]])


def _drz(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[-s, c, 0.0], [-c, -s, 0.0], [0.0, 0.0, 0.0]])


def euler_to_rotation(psi: Sequence[float]) -> np.ndarray:
    roll, pitch, yaw = psi
    return _rx(roll) @ _ry(pitch) @ _rz(yaw)


def rotation_derivatives(psi: Sequence[float]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Partial derivatives of ``euler_to_rotation`` w.r.t. roll, pitch, yaw."""
    roll, pitch, yaw = psi
    rx, ry, rz = _rx(roll), _ry(pitch), _rz(yaw)
    return (
        _drx(roll) @ ry @ rz,
        rx @ _dry(pitch) @ rz,
        rx @ ry @ _drz(yaw),
    )


def _wrap_pi(a: float) -> float:
    # atan2 may return -pi; the canonical interval is (-pi, pi]
    return math.pi if a <= -math.pi else a


def rotation_to_euler(R, tol: float = 1e-6) -> EulerAngles:
    """Inverse of :func:`euler_to_rotation`.

    At gimbal lock (``|pitch| = pi/2``) roll is set to zero and yaw absorbs
    the remaining rotation.
    """
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise NotARotation("expected a finite 3x3 matrix")
    if np.abs(R.T @ R - np.eye(3)).max() > tol or np.linalg.det(R) <= 0:
        raise NotARotation("matrix is not a proper rotation")
    cos_pitch = math.hypot(R[0, 0], R[0, 1])
    pitch = math.atan2(-R[0, 2], cos_pitch)
    if cos_pitch < _GIMBAL_TOL:
        roll = 0.0
        yaw = math.atan2(-R[1, 0], R[1, 1])
    else:
        roll = math.atan2(R[1, 2], R[2, 2])
        yaw = math.atan2(R[0, 1], R[0, 0])
    return EulerAngles(_wrap_pi(roll), pitch, _wrap_pi(yaw))


def angle_residual(a, b):
    """``a - b`` wrapped to ``(-pi, pi]``; works elementwise on arrays."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    inside = (d > -np.pi) & (d <= np.pi)
    w = np.where(inside, d, np.pi - np.mod(np.pi - d, 2.0 * np.pi))
    if w.ndim == 0:
        return float(w)
    return w
