"""Discrete-time schemes for xddot = -U'(x) on the planar Kepler potential.

Six methods share one driver.  Five are two-step recurrences in position
only (the velocity is implicit in consecutive positions); the sixth is the
fourth-order triple-jump composition of leapfrog, a one-step map on (x, v).

    sv   explicit central difference (stormer-verlet)
    mp   implicit midpoint-averaged gradient
    ml   2/3 sv + 1/3 mp mixture of the gradient terms
    lc   three-phase cycle: explicit lookback-midpoint, sv, implicit midpoint
    dec  sv with every third step replaced by the mp relation
    fr   triple-jump composition of leapfrog (fourth order)

All implicit relations are solved by a damped-free Newton iteration with the
analytic Jacobian; iteration counts are recorded for benchmarking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, NearSingularity, SolverFailure
from .kepler import (
    SINGULARITY_FLOOR,
    OrbitElements,
    PlanarVector,
    State,
    elements_from_state,
    gradient_jacobian,
    potential_gradient,
)

GradientFn = Callable[[PlanarVector], PlanarVector]
JacobianFn = Callable[[PlanarVector], tuple[float, float, float]]


class MethodId(Enum):
    SV = "sv"
    MP = "mp"
    ML = "ml"
    LC = "lc"
    DEC = "dec"
    FR = "fr"

    @classmethod
    def parse(cls, name: str) -> "MethodId":
        try:
            return cls(name.strip().lower())
        except ValueError:
            known = ", ".join(m.value for m in cls)
            raise ConfigurationError(
                f"unknown method {name!r}; expected one of: {known}"
            ) from None


# Methods whose every step needs a Newton solve.  lc and dec solve one
# implicit relation per three steps and are not listed here.
IMPLICIT_METHODS = frozenset({MethodId.MP, MethodId.ML})

# Triple-jump composition weights: theta = 1/(2 - 2^(1/3)), the unique real
# solution making the h^3 error terms of the three leapfrog substeps cancel.
FR_THETA = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_FR_WEIGHTS = (FR_THETA, 1.0 - 2.0 * FR_THETA, FR_THETA)


@dataclass(frozen=True)
class SolverConfig:
    """Newton iteration budget for the implicit step relations."""

    tolerance: float = 1e-12
    max_iterations: int = 50

    def __post_init__(self):
        if not (self.tolerance > 0.0 and math.isfinite(self.tolerance)):
            raise ConfigurationError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ConfigurationError(f"max_iterations must be >= 1, got {self.max_iterations}")


DEFAULT_SOLVER = SolverConfig()


@dataclass
class IntegrationStats:
    """Newton bookkeeping accumulated over a run."""

    implicit_solves: int = 0
    newton_iterations: int = 0

    @property
    def avg_newton_iterations(self) -> float:
        if self.implicit_solves == 0:
            return 0.0
        return self.newton_iterations / self.implicit_solves


@dataclass
class Trajectory:
    """Discrete solution: positions x_0 .. x_N at times k h.

    Velocities are stored only when the method produces them (fr); position-
    only methods leave them None and downstream consumers reconstruct by
    finite differences.  `elements` describe the exact orbit of the initial
    condition, kept for reference-solution comparisons.
    """

    method: MethodId
    h: float
    positions: np.ndarray
    start_velocity: PlanarVector
    elements: OrbitElements
    velocities: Optional[np.ndarray] = None
    stats: IntegrationStats = field(default_factory=IntegrationStats)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise ValueError("positions must have shape (n, 2)")
        if len(self.positions) < 2:
            raise ValueError("a trajectory needs at least two points")
        if self.velocities is not None:
            self.velocities = np.asarray(self.velocities, dtype=float)
            if self.velocities.shape != self.positions.shape:
                raise ValueError("velocities must match positions in shape")

    @property
    def n_steps(self) -> int:
        return len(self.positions) - 1

    @property
    def times(self) -> np.ndarray:
        return self.h * np.arange(len(self.positions))


def _newton2(residual, guess: tuple[float, float], cfg: SolverConfig,
             stats: Optional[IntegrationStats], label: str) -> tuple[float, float]:
    """Solve residual(z1, z2) = 0 for a symmetric-Jacobian 2x2 system.

    `residual` returns (f1, f2, j11, j12, j22).  Convergence is declared on
    the residual norm; the iteration count (iterations actually applied) is
    charged to `stats` as one implicit solve.
    """
    z1, z2 = guess
    for applied in range(cfg.max_iterations + 1):
        f1, f2, j11, j12, j22 = residual(z1, z2)
        if math.hypot(f1, f2) < cfg.tolerance:
            if stats is not None:
                stats.implicit_solves += 1
                stats.newton_iterations += applied
            return z1, z2
        if applied == cfg.max_iterations:
            break
        det = j11 * j22 - j12 * j12
        if det == 0.0 or not math.isfinite(det):
            raise SolverFailure(f"{label}: singular Newton system (det={det!r})")
        z1 -= (j22 * f1 - j12 * f2) / det
        z2 -= (j11 * f2 - j12 * f1) / det
    raise SolverFailure(
        f"{label}: Newton residual stayed above {cfg.tolerance} "
        f"after {cfg.max_iterations} iterations"
    )


def sv_step(x_prev: PlanarVector, x_cur: PlanarVector, h: float,
            grad: GradientFn = potential_gradient) -> PlanarVector:
    """x_next = 2 x_cur - x_prev - h^2 U'(x_cur)."""
    g = grad(x_cur)
    h2 = h * h
    return PlanarVector(
        2.0 * x_cur.x1 - x_prev.x1 - h2 * g.x1,
        2.0 * x_cur.x2 - x_prev.x2 - h2 * g.x2,
    )


def mp_step(x_prev: PlanarVector, x_cur: PlanarVector, h: float,
            cfg: SolverConfig = DEFAULT_SOLVER,
            grad: GradientFn = potential_gradient,
            grad_jac: JacobianFn = gradient_jacobian,
            stats: Optional[IntegrationStats] = None) -> PlanarVector:
    """Implicit relation with the gradient averaged at the two interval midpoints:

    x_next - 2 x_cur + x_prev
        = -(h^2/2) [U'((x_cur + x_next)/2) + U'((x_prev + x_cur)/2)].
    """
    h2 = h * h
    g_back = grad(PlanarVector(0.5 * (x_prev.x1 + x_cur.x1), 0.5 * (x_prev.x2 + x_cur.x2)))
    c1 = 2.0 * x_cur.x1 - x_prev.x1 - 0.5 * h2 * g_back.x1
    c2 = 2.0 * x_cur.x2 - x_prev.x2 - 0.5 * h2 * g_back.x2
    quarter_h2 = 0.25 * h2

    def residual(z1: float, z2: float):
        m = PlanarVector(0.5 * (x_cur.x1 + z1), 0.5 * (x_cur.x2 + z2))
        g = grad(m)
        j11, j12, j22 = grad_jac(m)
        return (
            z1 - c1 + 0.5 * h2 * g.x1,
            z2 - c2 + 0.5 * h2 * g.x2,
            1.0 + quarter_h2 * j11,
            quarter_h2 * j12,
            1.0 + quarter_h2 * j22,
        )

    guess = (2.0 * x_cur.x1 - x_prev.x1, 2.0 * x_cur.x2 - x_prev.x2)
    return PlanarVector(*_newton2(residual, guess, cfg, stats, "mp step"))


def ml_step(x_prev: PlanarVector, x_cur: PlanarVector, h: float,
            cfg: SolverConfig = DEFAULT_SOLVER,
            grad: GradientFn = potential_gradient,
            grad_jac: JacobianFn = gradient_jacobian,
            stats: Optional[IntegrationStats] = None) -> PlanarVector:
    """Mixture step: gradient weights 2/3 at x_cur, 1/6 at each midpoint.

    x_next - 2 x_cur + x_prev = -h^2 [ (2/3) U'(x_cur)
        + (1/6) U'((x_prev + x_cur)/2) + (1/6) U'((x_cur + x_next)/2) ].
    """
    h2 = h * h
    g_mid_back = grad(PlanarVector(0.5 * (x_prev.x1 + x_cur.x1), 0.5 * (x_prev.x2 + x_cur.x2)))
    g_cur = grad(x_cur)
    c1 = 2.0 * x_cur.x1 - x_prev.x1 - h2 * (g_cur.x1 * (2.0 / 3.0) + g_mid_back.x1 / 6.0)
    c2 = 2.0 * x_cur.x2 - x_prev.x2 - h2 * (g_cur.x2 * (2.0 / 3.0) + g_mid_back.x2 / 6.0)
    sixth_h2 = h2 / 6.0

    def residual(z1: float, z2: float):
        m = PlanarVector(0.5 * (x_cur.x1 + z1), 0.5 * (x_cur.x2 + z2))
        g = grad(m)
        j11, j12, j22 = grad_jac(m)
        return (
            z1 - c1 + sixth_h2 * g.x1,
            z2 - c2 + sixth_h2 * g.x2,
            1.0 + 0.5 * sixth_h2 * j11,
            0.5 * sixth_h2 * j12,
            1.0 + 0.5 * sixth_h2 * j22,
        )

    guess = (2.0 * x_cur.x1 - x_prev.x1, 2.0 * x_cur.x2 - x_prev.x2)
    return PlanarVector(*_newton2(residual, guess, cfg, stats, "ml step"))


def lc_step(step_index: int, x_prev: PlanarVector, x_cur: PlanarVector, h: float,
            cfg: SolverConfig = DEFAULT_SOLVER,
            grad: GradientFn = potential_gradient,
            grad_jac: JacobianFn = gradient_jacobian,
            stats: Optional[IntegrationStats] = None) -> PlanarVector:
    """Three-phase composition cycle, dispatched on step_index mod 3.

    index = 0:  explicit, gradient split between the lookback midpoint and x_cur:
                x_next = 2 x_cur - x_prev - (h^2/2) [U'((x_prev + x_cur)/2) + U'(x_cur)]
    index = 1:  plain sv step
    index = 2:  implicit, gradient split between x_cur and the forward midpoint:
                x_next - 2 x_cur + x_prev = -(h^2/2) [U'(x_cur) + U'((x_cur + x_next)/2)]
    """
    phase = step_index % 3
    if phase == 1:
        return sv_step(x_prev, x_cur, h, grad)
    h2 = h * h
    if phase == 0:
        g_mid = grad(PlanarVector(0.5 * (x_prev.x1 + x_cur.x1), 0.5 * (x_prev.x2 + x_cur.x2)))
        g_cur = grad(x_cur)
        return PlanarVector(
            2.0 * x_cur.x1 - x_prev.x1 - 0.5 * h2 * (g_mid.x1 + g_cur.x1),
            2.0 * x_cur.x2 - x_prev.x2 - 0.5 * h2 * (g_mid.x2 + g_cur.x2),
        )
    g_cur = grad(x_cur)
    c1 = 2.0 * x_cur.x1 - x_prev.x1 - 0.5 * h2 * g_cur.x1
    c2 = 2.0 * x_cur.x2 - x_prev.x2 - 0.5 * h2 * g_cur.x2
    quarter_h2 = 0.25 * h2

    def residual(z1: float, z2: float):
        m = PlanarVector(0.5 * (x_cur.x1 + z1), 0.5 * (x_cur.x2 + z2))
        g = grad(m)
        j11, j12, j22 = grad_jac(m)
        return (
            z1 - c1 + 0.5 * h2 * g.x1,
            z2 - c2 + 0.5 * h2 * g.x2,
            1.0 + quarter_h2 * j11,
            quarter_h2 * j12,
            1.0 + quarter_h2 * j22,
        )

    guess = (2.0 * x_cur.x1 - x_prev.x1, 2.0 * x_cur.x2 - x_prev.x2)
    return PlanarVector(*_newton2(residual, guess, cfg, stats, "lc implicit step"))


def dec_step(step_index: int, x_prev: PlanarVector, x_cur: PlanarVector, h: float,
             cfg: SolverConfig = DEFAULT_SOLVER,
             grad: GradientFn = potential_gradient,
             grad_jac: JacobianFn = gradient_jacobian,
             stats: Optional[IntegrationStats] = None) -> PlanarVector:
    """sv recurrence with every step_index = 2 mod 3 replaced by the mp relation."""
    if step_index % 3 == 2:
        return mp_step(x_prev, x_cur, h, cfg, grad, grad_jac, stats)
    return sv_step(x_prev, x_cur, h, grad)


def fr_step(state: State, h: float, grad: GradientFn = potential_gradient) -> State:
    """One triple-jump step: three leapfrog substeps with weights
    (theta, 1 - 2 theta, theta)."""
    x1, x2 = state.position
    v1, v2 = state.velocity
    for w in _FR_WEIGHTS:
        dt = w * h
        x1 += 0.5 * dt * v1
        x2 += 0.5 * dt * v2
        g = grad(PlanarVector(x1, x2))
        v1 -= dt * g.x1
        v2 -= dt * g.x2
        x1 += 0.5 * dt * v1
        x2 += 0.5 * dt * v2
    return State(PlanarVector(x1, x2), PlanarVector(v1, v2), state.time + h)


def init_second_point(method: MethodId, x0: PlanarVector, v0: PlanarVector, h: float,
                      cfg: SolverConfig = DEFAULT_SOLVER,
                      grad: GradientFn = potential_gradient,
                      grad_jac: JacobianFn = gradient_jacobian,
                      stats: Optional[IntegrationStats] = None) -> PlanarVector:
    """First trajectory point after x0 for the two-step methods.

    Chosen so the method's own discrete momentum at step 0 equals v0:

        sv/lc/dec:  (x1 - x0)/h + (h/2) U'(x0) = v0          (explicit)
        mp:         (x1 - x0)/h + (h/2) U'((x0 + x1)/2) = v0  (implicit)
        ml:         (x1 - x0)/h + (h/3) U'(x0)
                                + (h/6) U'((x0 + x1)/2) = v0  (implicit)

    For fr the second point is simply the first triple-jump step.
    """
    if method is MethodId.FR:
        return fr_step(State(x0, v0, 0.0), h, grad).position
    h2 = h * h
    if method in (MethodId.SV, MethodId.LC, MethodId.DEC):
        g = grad(x0)
        return PlanarVector(
            x0.x1 + h * v0.x1 - 0.5 * h2 * g.x1,
            x0.x2 + h * v0.x2 - 0.5 * h2 * g.x2,
        )
    if method is MethodId.MP:
        c1 = x0.x1 + h * v0.x1
        c2 = x0.x2 + h * v0.x2
        mid_weight = 0.5 * h2
    elif method is MethodId.ML:
        g0 = grad(x0)
        c1 = x0.x1 + h * v0.x1 - h2 * g0.x1 / 3.0
        c2 = x0.x2 + h * v0.x2 - h2 * g0.x2 / 3.0
        mid_weight = h2 / 6.0
    else:
        raise ConfigurationError(f"no initializer for method {method!r}")

    def residual(z1: float, z2: float):
        m = PlanarVector(0.5 * (x0.x1 + z1), 0.5 * (x0.x2 + z2))
        g = grad(m)
        j11, j12, j22 = grad_jac(m)
        return (
            z1 - c1 + mid_weight * g.x1,
            z2 - c2 + mid_weight * g.x2,
            1.0 + 0.5 * mid_weight * j11,
            0.5 * mid_weight * j12,
            1.0 + 0.5 * mid_weight * j22,
        )

    guess = (x0.x1 + h * v0.x1, x0.x2 + h * v0.x2)
    return PlanarVector(*_newton2(residual, guess, cfg, stats,
                                  f"{method.value} initialization"))


def integrate(method: MethodId, x0: PlanarVector, v0: PlanarVector, h: float,
              n_steps: int, cfg: SolverConfig = DEFAULT_SOLVER,
              floor: float = SINGULARITY_FLOOR) -> Trajectory:
    """Run n_steps of a scheme from (x0, v0) with fixed step h.

    The initial condition must describe a bound, non-radial orbit (the exact
    elements are recorded on the trajectory).  On a numerical failure the
    raised error carries .step_index (index of the point that could not be
    computed) and .partial_positions.
    """
    if not (h > 0.0 and math.isfinite(h)):
        raise ConfigurationError(f"step size must be positive, got {h}")
    if n_steps < 1:
        raise ConfigurationError(f"n_steps must be >= 1, got {n_steps}")
    x0 = PlanarVector(*x0)
    v0 = PlanarVector(*v0)
    elements = elements_from_state(State(x0, v0, 0.0), floor)
    grad = potential_gradient if floor == SINGULARITY_FLOOR else (
        lambda x: potential_gradient(x, floor))
    grad_jac = gradient_jacobian if floor == SINGULARITY_FLOOR else (
        lambda x: gradient_jacobian(x, floor))
    stats = IntegrationStats()

    if method is MethodId.FR:
        states = [State(x0, v0, 0.0)]
        k = 0
        try:
            for k in range(n_steps):
                states.append(fr_step(states[-1], h, grad))
        except (SolverFailure, NearSingularity) as err:
            _annotate_failure(err, method, k + 1, [s.position for s in states])
            raise
        positions = np.array([s.position for s in states], dtype=float)
        velocities = np.array([s.velocity for s in states], dtype=float)
        return Trajectory(method, h, positions, v0, elements, velocities, stats)

    xs = [x0]
    k = 0
    try:
        xs.append(init_second_point(method, x0, v0, h, cfg, grad, grad_jac, stats))
        for k in range(1, n_steps):
            if method is MethodId.SV:
                nxt = sv_step(xs[-2], xs[-1], h, grad)
            elif method is MethodId.MP:
                nxt = mp_step(xs[-2], xs[-1], h, cfg, grad, grad_jac, stats)
            elif method is MethodId.ML:
                nxt = ml_step(xs[-2], xs[-1], h, cfg, grad, grad_jac, stats)
            elif method is MethodId.LC:
                nxt = lc_step(k, xs[-2], xs[-1], h, cfg, grad, grad_jac, stats)
            elif method is MethodId.DEC:
                nxt = dec_step(k, xs[-2], xs[-1], h, cfg, grad, grad_jac, stats)
            else:
                raise ConfigurationError(f"no stepper for method {method!r}")
            xs.append(nxt)
    except (SolverFailure, NearSingularity) as err:
        _annotate_failure(err, method, k + 1, xs)
        raise
    return Trajectory(method, h, np.array(xs, dtype=float), v0, elements, None, stats)


def _annotate_failure(err: Exception, method: MethodId, step_index: int,
                      positions) -> None:
    err.method = method
    err.step_index = step_index
    err.partial_positions = np.array(positions, dtype=float)
    detail = err.args[0] if err.args else err.__class__.__name__
    err.args = (f"{method.value} failed computing point {step_index}: {detail}",)


def reconstruct_velocity(traj: Trajectory, k: int) -> PlanarVector:
    """Finite-difference velocity at sample k of a position-only trajectory.

    Central difference (second order) for interior samples; one-sided
    three-point stencils at the ends.  A two-point trajectory falls back to
    the single forward difference.
    """
    n = traj.n_steps
    if not 0 <= k <= n:
        raise IndexError(f"sample index {k} outside [0, {n}]")
    X = traj.positions
    if len(X) == 2:
        v = (X[1] - X[0]) / traj.h
    elif k == 0:
        v = (-3.0 * X[0] + 4.0 * X[1] - X[2]) / (2.0 * traj.h)
    elif k == n:
        v = (3.0 * X[n] - 4.0 * X[n - 1] + X[n - 2]) / (2.0 * traj.h)
    else:
        v = (X[k + 1] - X[k - 1]) / (2.0 * traj.h)
    return PlanarVector(float(v[0]), float(v[1]))


def reconstruct_velocities(traj: Trajectory) -> np.ndarray:
    """Vectorized reconstruct_velocity over every sample, shape (n+1, 2)."""
    X = traj.positions
    h = traj.h
    V = np.empty_like(X)
    if len(X) == 2:
        V[:] = (X[1] - X[0]) / h
        return V
    V[1:-1] = (X[2:] - X[:-2]) / (2.0 * h)
    V[0] = (-3.0 * X[0] + 4.0 * X[1] - X[2]) / (2.0 * h)
    V[-1] = (3.0 * X[-1] - 4.0 * X[-2] + X[-3]) / (2.0 * h)
    return V
