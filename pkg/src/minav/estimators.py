"""ML and MAP estimation of the navigation state as weighted nonlinear least squares."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dipole import MeasurementPacket, field_and_jacobian_raw
from .errors import (
    DegenerateRange,
    InvalidPrior,
    NonFiniteResidual,
    NotStatic,
    SingularNormalEquations,
)
from .geom import EulerAngles, NavState, angle_residual

GRAVITY = 9.81


class Target(enum.Enum):
    POSITION = "position"
    ORIENTATION = "orientation"


_SLICES = {Target.POSITION: slice(0, 3), Target.ORIENTATION: slice(3, 6)}


@dataclass(frozen=True)
class GaussianPrior:
    """Gaussian prior on the position or on the Euler angles.

    Give either per-component ``variances`` (``inf`` means no information)
    or a full ``covariance``.
    """

    target: Target
    mean: np.ndarray
    variances: Optional[np.ndarray] = None
    covariance: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "target", Target(self.target))
        mean = np.asarray(self.mean, dtype=float).reshape(3)
        if not np.all(np.isfinite(mean)):
            raise InvalidPrior("prior mean must be finite")
        object.__setattr__(self, "mean", mean)
        if (self.variances is None) == (self.covariance is None):
            raise InvalidPrior("give exactly one of variances or covariance")
        if self.variances is not None:
            v = np.asarray(self.variances, dtype=float).reshape(3)
            if np.any(np.isnan(v)) or np.any(v <= 0):
                raise InvalidPrior(f"variances must be positive, got {v}")
            object.__setattr__(self, "variances", v)
        else:
            cov = np.asarray(self.covariance, dtype=float).reshape(3, 3)
            if not np.all(np.isfinite(cov)) or not np.allclose(cov, cov.T, rtol=0, atol=1e-15):
                raise InvalidPrior("covariance must be finite and symmetric")
            try:
                np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise InvalidPrior("covariance must be positive definite") from None
            object.__setattr__(self, "covariance", cov)

    @classmethod
    def isotropic(cls, target, mean, std: float) -> GaussianPrior:
        return cls(target, mean, variances=np.full(3, float(std) ** 2))

    def sqrt_information(self) -> np.ndarray:
        """Rows ``W`` with ``W^T W`` equal to the information matrix.

        Components with infinite variance produce no row at all.
        """
        if self.variances is not None:
            finite = np.isfinite(self.variances)
            return np.eye(3)[finite] / np.sqrt(self.variances[finite])[:, None]
        return np.linalg.inv(np.linalg.cholesky(self.covariance))

    def information(self) -> np.ndarray:
        W = self.sqrt_information()
        return W.T @ W


@dataclass
class SolverOptions:
    initial_damping: float = 1e-3
    damping_factor: float = 10.0
    ftol: float = 1e-12
    xtol: float = 1e-12
    max_iter: int = 200
    max_damping: float = 1e16


@dataclass
class LeastSquaresResult:
    x: np.ndarray
    cost: float
    iterations: int
    converged: bool
    jtj: np.ndarray
    gradient_norm: float
    cost_history: list = field(default_factory=list)


@dataclass
class EstimateResult:
    state: NavState
    cost: float
    iterations: int
    converged: bool
    covariance: np.ndarray
    gradient_norm: float = 0.0
    cost_history: list = field(default_factory=list)


ResidualFn = Callable[[np.ndarray], "tuple[np.ndarray, np.ndarray]"]


def _evaluate(fun, x):
    try:
        f, J = fun(x)
    except DegenerateRange:
        return None, None, math.inf
    cost = float(f @ f)
    if not math.isfinite(cost) or not np.all(np.isfinite(J)):
        return None, None, math.inf
    return f, J, cost


def solve_nlls(fun: ResidualFn, x0, options: Optional[SolverOptions] = None) -> LeastSquaresResult:
    """Levenberg-Marquardt on ``sum(f(x)**2)``.

    ``fun`` returns the stacked (already whitened) residuals and their
    Jacobian. Damping is Marquardt-scaled by ``diag(J^T J)``.
    """
    opts = options or SolverOptions()
    x = np.array(x0, dtype=float)
    f, J, cost = _evaluate(fun, x)
    if f is None:
        raise NonFiniteResidual("residuals are not finite at the initial point")
    history = [cost]
    lam = opts.initial_damping
    iterations = 0
    converged = cost == 0.0
    while not converged and iterations < opts.max_iter:
        iterations += 1
        g = J.T @ f
        A = J.T @ J
        d = np.diag(A)
        dmax = d.max()
        scale = np.maximum(d, 1e-12 * dmax) if dmax > 0 else d
        try:
            step = np.linalg.solve(A + lam * np.diag(scale), -g)
        except np.linalg.LinAlgError:
            raise SingularNormalEquations("damped normal equations are singular") from None
        if not np.all(np.isfinite(step)):
            raise SingularNormalEquations("damped normal equations gave a non-finite step")
        step_small = np.linalg.norm(step) <= opts.xtol * (np.linalg.norm(x) + opts.xtol)
        x_new = x + step
        f_new, J_new, cost_new = _evaluate(fun, x_new)
        if cost_new <= cost:
            decrease = cost - cost_new
            x, f, J = x_new, f_new, J_new
            cost_old, cost = cost, cost_new
            history.append(cost)
            lam /= opts.damping_factor
            if cost == 0.0 or decrease <= opts.ftol * cost_old or step_small:
                converged = True
        else:
            lam *= opts.damping_factor
            if step_small:
                converged = True
            elif lam > opts.max_damping:
                break
    A = J.T @ J
    return LeastSquaresResult(
        x=x,
        cost=cost,
        iterations=iterations,
        converged=converged,
        jtj=A,
        gradient_norm=float(np.linalg.norm(J.T @ f)),
        cost_history=history,
    )


def mi_residual(packet: MeasurementPacket) -> ResidualFn:
    """Whitened residuals ``L^-1 (h(x) - y)`` and their Jacobian."""
    y = packet.readings
    if not np.all(np.isfinite(y)):
        raise NonFiniteResidual("packet contains non-finite readings")
    moments = packet.moments
    c = packet.c
    whiten = packet.whiten

    def fun(x):
        h, J = field_and_jacobian_raw(x[:3], x[3:], moments, c)
        return whiten(h - y).ravel(), whiten(J).reshape(-1, 6)

    return fun


def mi_cost(packet: MeasurementPacket, state: NavState) -> float:
    f, _ = mi_residual(packet)(state.as_vector())
    return float(f @ f)


def _prior_blocks(priors: Sequence[GaussianPrior]):
    seen = set()
    blocks = []
    for p in priors:
        if p.target in seen:
            raise InvalidPrior(f"more than one {p.target.value} prior")
        seen.add(p.target)
        W = p.sqrt_information()
        if W.shape[0]:
            blocks.append((p.target, W, p.mean))
    return blocks


def map_residual(packet: MeasurementPacket, priors: Sequence[GaussianPrior]) -> ResidualFn:
    base = mi_residual(packet)
    blocks = _prior_blocks(priors)
    if not blocks:
        return base
    k = sum(W.shape[0] for _, W, _ in blocks)

    def fun(x):
        f0, J0 = base(x)
        fp = np.empty(k)
        Jp = np.zeros((k, 6))
        row = 0
        for target, W, mean in blocks:
            sl = _SLICES[target]
            if target is Target.ORIENTATION:
                d = angle_residual(x[sl], mean)
            else:
                d = x[sl] - mean
            n = W.shape[0]
            fp[row : row + n] = W @ d
            Jp[row : row + n, sl] = W
            row += n
        return np.concatenate([f0, fp]), np.vstack([J0, Jp])

    return fun


def _to_estimate(res: LeastSquaresResult) -> EstimateResult:
    try:
        cov = np.linalg.inv(res.jtj)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(res.jtj)
    state = NavState.from_vector(res.x)
    state = NavState(state.r, state.psi.normalized())
    return EstimateResult(
        state=state,
        cost=res.cost,
        iterations=res.iterations,
        converged=res.converged,
        covariance=cov,
        gradient_norm=res.gradient_norm,
        cost_history=res.cost_history,
    )


def _default_init(packet: MeasurementPacket) -> NavState:
    from .baseline import baseline_estimate

    return baseline_estimate(packet)


def ml_estimate(
    packet: MeasurementPacket,
    init: Optional[NavState] = None,
    options: Optional[SolverOptions] = None,
) -> EstimateResult:
    """Maximum-likelihood estimate; starts from the closed-form baseline by default."""
    fun = mi_residual(packet)
    if init is None:
        init = _default_init(packet)
    return _to_estimate(solve_nlls(fun, init.as_vector(), options))


def map_estimate(
    packet: MeasurementPacket,
    init: Optional[NavState] = None,
    priors: Sequence[GaussianPrior] = (),
    options: Optional[SolverOptions] = None,
) -> EstimateResult:
    """MAP estimate with Gaussian priors on position and/or orientation.

    Without informative priors this follows exactly the same iterates as
    :func:`ml_estimate`.
    """
    fun = map_residual(packet, priors)
    if init is None:
        init = _default_init(packet)
        for p in priors:
            if p.target is Target.POSITION:
                init = resolve_hemisphere(init, p.mean)
    return _to_estimate(solve_nlls(fun, init.as_vector(), options))


def resolve_hemisphere(estimate: NavState, reference) -> NavState:
    """Flip the position sign if that brings it strictly closer to ``reference``."""
    ref = np.asarray(reference, dtype=float)
    r = estimate.r
    if np.linalg.norm(-r - ref) < np.linalg.norm(r - ref):
        return NavState(-r, estimate.psi)
    return estimate


def accel_roll_pitch(accel_samples, gravity: float = GRAVITY, tolerance: float = 0.2):
    """Roll and pitch from the mean specific force of a static receiver."""
    a = np.asarray(accel_samples, dtype=float).reshape(-1, 3)
    if a.shape[0] == 0:
        raise NotStatic("no accelerometer samples")
    ax, ay, az = a.mean(axis=0)
    norm = math.sqrt(ax * ax + ay * ay + az * az)
    if not abs(norm - gravity) <= tolerance * gravity:
        raise NotStatic(f"mean specific force {norm:.3f} m/s^2 is not close to gravity")
    return math.atan2(ay, az), math.atan2(-ax, math.hypot(ay, az))


def orientation_prior_from_accel(accel_samples, sigma: float) -> GaussianPrior:
    """Roll/pitch prior with standard deviation ``sigma``; yaw is left free."""
    roll, pitch = accel_roll_pitch(accel_samples)
    return GaussianPrior(
        Target.ORIENTATION,
        np.array([roll, pitch, 0.0]),
        variances=np.array([sigma**2, sigma**2, math.inf]),
    )


def simulate_accel(psi: EulerAngles, n: int, noise_std: float, rng: np.random.Generator,
                   gravity: float = GRAVITY) -> np.ndarray:
    """Quasi-static specific force samples ``R(psi) [0, 0, g] + noise``."""
    from .geom import euler_to_rotation

    f = euler_to_rotation(psi) @ np.array([0.0, 0.0, gravity])
    return f + noise_std * rng.standard_normal((n, 3))
