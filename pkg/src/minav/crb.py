"""Fisher information and Cramer-Rao bounds for the dipole measurement model."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dipole import MomentSchedule, field_and_jacobian
from .errors import BadConfig, SingularInformation
from .estimators import GaussianPrior, Target
from .geom import NavState


class FimKind(enum.Enum):
    POSITION_KNOWN_ORIENTATION = "position_known_orientation"
    FULL_STATE = "full_state"
    RANGE_SCALAR = "range_scalar"


class FimSource(enum.Enum):
    CLOSED_FORM = "closed_form"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class FisherInfo:
    matrix: np.ndarray
    kind: FimKind
    source: FimSource

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        object.__setattr__(self, "matrix", M)

    @property
    def position_block(self) -> np.ndarray:
        return self.matrix[:3, :3]


def _check_axis_config(r, N, sigma):
    if N <= 0 or N % 3:
        raise BadConfig(f"N must be a positive multiple of 3, got {N}")
    if not sigma > 0:
        raise BadConfig("sigma must be positive")
    r = np.asarray(r, dtype=float).reshape(3)
    if not np.linalg.norm(r) > 0:
        raise BadConfig("position must be nonzero")
    return r


def sample_information(r, m, c: float, sigma: float) -> np.ndarray:
    """Position information contributed by one sample with moment ``m``.

    ``9 c^2 / (sigma^2 |r|^10) * ((r.m)^2 I + |r|^2 m m^T
    - 2 (r.m)(r m^T + m r^T) + (5 (r.m)^2/|r|^2 + m.m) r r^T)``
    """
    r = np.asarray(r, dtype=float)
    m = np.asarray(m, dtype=float)
    rr = r @ r
    rm = r @ m
    mm = m @ m
    G = (
        rm**2 * np.eye(3)
        + rr * np.outer(m, m)
        - 2.0 * rm * (np.outer(r, m) + np.outer(m, r))
        + (5.0 * rm**2 / rr + mm) * np.outer(r, r)
    )
    return 9.0 * c**2 / (sigma**2 * rr**5) * G


def position_fim_closed(r, N: int, c: float, m: float, sigma: float) -> FisherInfo:
    """Position FIM with known orientation for an axis-cycled schedule, ``P = sigma^2 I``."""
    r = _check_axis_config(r, N, sigma)
    cycle = sum(sample_information(r, m * e, c, sigma) for e in np.eye(3))
    return FisherInfo((N // 3) * cycle, FimKind.POSITION_KNOWN_ORIENTATION, FimSource.CLOSED_FORM)


def axis_information(r, N: int, c: float, m: float, sigma: float) -> np.ndarray:
    """Per-axis information ``6 N c^2 m^2 / (sigma^2 |r|^8) (1 + 2 r_i^2/|r|^2)``."""
    r = _check_axis_config(r, N, sigma)
    rr = r @ r
    return 6.0 * N * c**2 * m**2 / (sigma**2 * rr**4) * (1.0 + 2.0 * r**2 / rr)


def range_fisher(r, N: int, c: float, m: float, sigma: float) -> float:
    """Range information ``18 N c^2 m^2 / (sigma^2 |r|^8)``."""
    r = _check_axis_config(r, N, sigma)
    rr = float(r @ r)
    return 18.0 * N * c**2 * m**2 / (sigma**2 * rr**4)


def full_fim(state: NavState, schedule: MomentSchedule, c: float, P) -> FisherInfo:
    """Numeric 6x6 FIM ``sum_k J_k^T P^-1 J_k`` over position and Euler angles."""
    _, J = field_and_jacobian(state, schedule.moments, c)
    Pinv = np.linalg.inv(np.asarray(P, dtype=float))
    F = np.einsum("nia,ij,njb->ab", J, Pinv, J)
    return FisherInfo(0.5 * (F + F.T), FimKind.FULL_STATE, FimSource.NUMERIC)


def add_prior_information(fim: FisherInfo, priors: Sequence[GaussianPrior]) -> FisherInfo:
    """Bayesian information: data FIM plus block-diagonal prior information."""
    F = fim.matrix.copy()
    for p in priors:
        sl = slice(0, 3) if p.target is Target.POSITION else slice(3, 6)
        F[sl, sl] += p.information()
    return FisherInfo(F, fim.kind, fim.source)


def _inverse(F: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(F)
    if not w[0] > 1e-12 * w[-1]:
        raise SingularInformation("information matrix is singular or ill-conditioned")
    L = np.linalg.cholesky(F)
    Linv = np.linalg.inv(L)
    return Linv.T @ Linv


def scalar_rmse_bound(fim: FisherInfo, block: Target | str = Target.POSITION) -> float:
    """``sqrt(trace(block of F^-1) / 3)``, the marginal per-axis RMSE bound."""
    block = Target(block)
    cov = _inverse(fim.matrix)
    if cov.shape == (3, 3):
        if fim.kind is FimKind.POSITION_KNOWN_ORIENTATION and block is Target.ORIENTATION:
            raise ValueError("position-only FIM has no orientation block")
        sub = cov
    else:
        sl = slice(0, 3) if block is Target.POSITION else slice(3, 6)
        sub = cov[sl, sl]
    return math.sqrt(np.trace(sub) / 3.0)


def known_block_bound(fim: FisherInfo, block: Target | str) -> float:
    """Bound for one block when the other block is known exactly."""
    block = Target(block)
    sl = slice(0, 3) if block is Target.POSITION else slice(3, 6)
    sub = FisherInfo(fim.matrix[sl, sl], FimKind.FULL_STATE, fim.source)
    return math.sqrt(np.trace(_inverse(sub.matrix)) / 3.0)
