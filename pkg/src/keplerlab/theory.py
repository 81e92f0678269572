"""Step-size perturbation theory for the second-order schemes.

Backward error analysis gives each scheme a modified Lagrangian

    L_h = |xdot|^2/2 + 1/|x| + (h^2/24) * correction(x, xdot) + O(h^4),

whose flow the discrete trajectory follows one order deeper than the exact
one.  The correction breaks the hidden symmetry that freezes the Kepler
apsis line, and the resulting apsis drift per revolution follows from the
orbit average of the correction's Euler-Lagrange deficit paired against the
symmetry generator of the Laplace-Runge-Lenz component.  This module
carries those objects plus closed forms of the orbit averages they need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .errors import ConfigurationError, SingularMassMatrix
from .integrators import MethodId
from .kepler import (
    SINGULARITY_FLOOR,
    ExactOrbit,
    OrbitElements,
    PlanarVector,
    State,
    perihelion_state,
    radius,
)

REFERENCE_STEP = 0.005
DEFAULT_AVERAGE_NODES = 2048
MIN_AVERAGE_NODES = 64

# Correction terms (coefficient of 1/r^4, |v|^2/r^3, <x,v>^2/r^5) that enter
# the modified Lagrangian at order h^2/24.
_LAGRANGIAN_BRACKET = {
    MethodId.SV: (1.0, -2.0, 6.0),
    MethodId.MP: (1.0, 1.0, -3.0),
}


def _el_deficit_coefficients(bracket: tuple[float, float, float]) -> tuple[float, float, float, float]:
    """Euler-Lagrange deficit of a/r^4 + b u/r^3 + c s^2/r^5 on Kepler motion.

    With u = |v|^2, s = <x, v> and xddot = -x/r^3 substituted, the deficit
    (d/dx - d/dt d/dv applied to the correction) collapses to
    c1 x/r^6 + c2 u x/r^5 + c3 s^2 x/r^7 + c4 s v/r^5.
    """
    a_, b_, c_ = bracket
    return (-4.0 * a_ + 2.0 * b_ + 2.0 * c_, -3.0 * b_ - 2.0 * c_, 5.0 * c_, 6.0 * b_)


class PrecessionFormula(Enum):
    CLOSED_FORM = "closed_form"
    QUADRATURE = "quadrature"


@dataclass(frozen=True)
class PrecessionPrediction:
    """Leading-order apsis rotation per revolution for a scheme at step h."""

    method: MethodId
    rate_per_revolution: float
    leading_order: int
    formula: PrecessionFormula


@dataclass(frozen=True)
class ModifiedModel:
    """Continuous system interpolating a second-order scheme to O(h^4).

    Only sv and mp have closed-form corrections here; h = 0 is allowed and
    reduces everything to the exact Kepler problem.
    """

    method: MethodId
    h: float

    def __post_init__(self):
        if self.method not in _LAGRANGIAN_BRACKET:
            raise ConfigurationError(
                f"modified Lagrangian available for sv and mp only, got {self.method.value}"
            )
        if not (self.h >= 0.0 and math.isfinite(self.h)):
            raise ConfigurationError(f"step size must be nonnegative, got {self.h}")

    @property
    def epsilon(self) -> float:
        return self.h * self.h / 24.0


def modified_lagrangian(model: ModifiedModel, state: State,
                        floor: float = SINGULARITY_FLOOR) -> float:
    """Value of the truncated modified Lagrangian at a phase-space point."""
    x, v = state.position, state.velocity
    r = radius(x, floor)
    u = v.x1 * v.x1 + v.x2 * v.x2
    s = x.x1 * v.x1 + x.x2 * v.x2
    alpha, beta, gamma = _LAGRANGIAN_BRACKET[model.method]
    r3 = r * r * r
    correction = alpha / (r3 * r) + beta * u / r3 + gamma * s * s / (r3 * r * r)
    return 0.5 * u + 1.0 / r + model.epsilon * correction


def _modified_acceleration_scalar(model: ModifiedModel, x1: float, x2: float,
                                  v1: float, v2: float,
                                  floor: float) -> tuple[float, float]:
    r2 = x1 * x1 + x2 * x2
    r = math.sqrt(r2)
    if r < floor:
        raise SingularMassMatrix(
            f"|x| = {r:.3e} inside the collision guard {floor:.3e}")
    eps = model.epsilon
    r3 = r2 * r
    r5 = r3 * r2
    r6 = r3 * r3
    r7 = r5 * r2
    u = v1 * v1 + v2 * v2
    s = x1 * v1 + x2 * v2
    alpha, beta, gamma = _LAGRANGIAN_BRACKET[model.method]

    # velocity Hessian: M = I + eps (2 beta I / r^3 + 2 gamma x x^T / r^5)
    m11 = 1.0 + eps * (2.0 * beta / r3 + 2.0 * gamma * x1 * x1 / r5)
    m12 = eps * 2.0 * gamma * x1 * x2 / r5
    m22 = 1.0 + eps * (2.0 * beta / r3 + 2.0 * gamma * x2 * x2 / r5)
    trace = m11 + m22
    spread = math.hypot(m11 - m22, 2.0 * m12)
    lam_min = 0.5 * (trace - spread)
    lam_max = 0.5 * (trace + spread)
    if lam_min <= 0.0 or lam_max > 1e8 * lam_min:
        raise SingularMassMatrix(
            f"velocity Hessian not safely invertible at |x| = {r:.3e} "
            f"(eigenvalues {lam_min:.3e}, {lam_max:.3e})"
        )

    # position gradient of the Lagrangian
    g1 = -x1 / r3 + eps * (-4.0 * alpha * x1 / r6 - 3.0 * beta * u * x1 / r5
                           + 2.0 * gamma * s * v1 / r5 - 5.0 * gamma * s * s * x1 / r7)
    g2 = -x2 / r3 + eps * (-4.0 * alpha * x2 / r6 - 3.0 * beta * u * x2 / r5
                           + 2.0 * gamma * s * v2 / r5 - 5.0 * gamma * s * s * x2 / r7)
    # mixed term: (d/dx of dL/dv) contracted with v
    c1 = eps * (-6.0 * beta * s * v1 / r5 + 2.0 * gamma * (u * x1 + s * v1) / r5
                - 10.0 * gamma * s * s * x1 / r7)
    c2 = eps * (-6.0 * beta * s * v2 / r5 + 2.0 * gamma * (u * x2 + s * v2) / r5
                - 10.0 * gamma * s * s * x2 / r7)
    b1 = g1 - c1
    b2 = g2 - c2
    det = m11 * m22 - m12 * m12
    return ((m22 * b1 - m12 * b2) / det, (m11 * b2 - m12 * b1) / det)


def modified_acceleration(model: ModifiedModel, state: State,
                          floor: float = SINGULARITY_FLOOR) -> PlanarVector:
    """Acceleration of the modified flow: solve M(x, v) xddot = rhs(x, v).

    At h = 0 this is exactly -x/|x|^3.  Raises SingularMassMatrix when the
    velocity Hessian is not safely invertible (condition number above 1e8).
    """
    a1, a2 = _modified_acceleration_scalar(
        model, state.position.x1, state.position.x2,
        state.velocity.x1, state.velocity.x2, floor)
    return PlanarVector(a1, a2)


def integrate_modified(model: ModifiedModel, x0: PlanarVector, v0: PlanarVector,
                       t_end: float, n_samples: int,
                       reference_step: float = REFERENCE_STEP,
                       floor: float = SINGULARITY_FLOOR
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integrate the modified flow with classical RK4 at a fixed small step.

    Samples are returned at the n_samples + 1 uniform times covering
    [0, t_end]; each sample segment is subdivided so the internal step never
    exceeds reference_step.  Returns (times, positions, velocities).
    """
    if not (t_end > 0.0 and math.isfinite(t_end)):
        raise ConfigurationError(f"t_end must be positive, got {t_end}")
    if n_samples < 1:
        raise ConfigurationError(f"n_samples must be >= 1, got {n_samples}")
    if not (reference_step > 0.0 and math.isfinite(reference_step)):
        raise ConfigurationError(f"reference_step must be positive, got {reference_step}")
    segment = t_end / n_samples
    substeps = max(1, math.ceil(segment / reference_step))
    dt = segment / substeps
    times = segment * np.arange(n_samples + 1)
    X = np.empty((n_samples + 1, 2))
    V = np.empty((n_samples + 1, 2))
    x1, x2 = float(x0[0]), float(x0[1])
    v1, v2 = float(v0[0]), float(v0[1])
    X[0] = (x1, x2)
    V[0] = (v1, v2)
    half = 0.5 * dt
    sixth = dt / 6.0
    for i in range(1, n_samples + 1):
        for _ in range(substeps):
            a1, b1 = _modified_acceleration_scalar(model, x1, x2, v1, v2, floor)
            px, py = x1 + half * v1, x2 + half * v2
            pv1, pv2 = v1 + half * a1, v2 + half * b1
            a2_, b2_ = _modified_acceleration_scalar(model, px, py, pv1, pv2, floor)
            qx, qy = x1 + half * pv1, x2 + half * pv2
            qv1, qv2 = v1 + half * a2_, v2 + half * b2_
            a3, b3 = _modified_acceleration_scalar(model, qx, qy, qv1, qv2, floor)
            rx, ry = x1 + dt * qv1, x2 + dt * qv2
            rv1, rv2 = v1 + dt * a3, v2 + dt * b3
            a4, b4 = _modified_acceleration_scalar(model, rx, ry, rv1, rv2, floor)
            x1 += sixth * (v1 + 2.0 * pv1 + 2.0 * qv1 + rv1)
            x2 += sixth * (v2 + 2.0 * pv2 + 2.0 * qv2 + rv2)
            v1 += sixth * (a1 + 2.0 * a2_ + 2.0 * a3 + a4)
            v2 += sixth * (b1 + 2.0 * b2_ + 2.0 * b3 + b4)
        X[i] = (x1, x2)
        V[i] = (v1, v2)
    return times, X, V


def lrl_symmetry_field(state: State) -> PlanarVector:
    """Phase-space generator whose Noether charge is the first LRL component.

    xi = (-x2 v2 / 2,  x1 v2 - v1 x2 / 2), evaluated along the motion.
    """
    (x1, x2), (v1, v2) = state.position, state.velocity
    return PlanarVector(-0.5 * x2 * v2, x1 * v2 - 0.5 * v1 * x2)


def perturbation_field(method: MethodId, state: State,
                       floor: float = SINGULARITY_FLOOR) -> PlanarVector:
    """Euler-Lagrange deficit of the scheme's h^2 correction on Kepler motion.

    The h^2/24 prefactor is NOT included; multiply by model.epsilon to get
    the physical perturbation.  Defined for sv and mp.
    """
    if method not in _LAGRANGIAN_BRACKET:
        raise ConfigurationError(
            f"perturbation field available for sv and mp only, got {method.value}"
        )
    c6, cu, cs2, csv = _el_deficit_coefficients(_LAGRANGIAN_BRACKET[method])
    x, v = state.position, state.velocity
    r = radius(x, floor)
    r2 = r * r
    r5 = r2 * r2 * r
    r6 = r5 * r
    r7 = r6 * r
    u = v.x1 * v.x1 + v.x2 * v.x2
    s = x.x1 * v.x1 + x.x2 * v.x2
    common = c6 / r6 + cu * u / r5 + cs2 * s * s / r7
    return PlanarVector(
        common * x.x1 + csv * s * v.x1 / r5,
        common * x.x2 + csv * s * v.x2 / r5,
    )


def orbit_average(fn: Callable[[State], float], elements: OrbitElements,
                  nodes: int = DEFAULT_AVERAGE_NODES) -> float:
    """Time average of fn over one period of the exact orbit.

    Uniform sampling in time; for a periodic analytic integrand the
    rectangle rule converges spectrally, so the default node count leaves
    the Kepler-solve tolerance as the dominant error.
    """
    if nodes < MIN_AVERAGE_NODES:
        raise ConfigurationError(f"need at least {MIN_AVERAGE_NODES} nodes, got {nodes}")
    orbit = ExactOrbit(perihelion_state(elements))
    period = orbit.elements.T
    total = 0.0
    for k in range(nodes):
        total += fn(orbit.state_at(period * k / nodes))
    return total / nodes


def orbit_average_closed_form(power: int, elements: OrbitElements) -> float:
    """Closed form of the orbit average of x2/|x|^power, apsis on the +x2 axis.

    Available for power = 5, 6, 7:
        <x2/r^5> = (a/b^5) e
        <x2/r^6> = (a^2/b^7) (3e/2 + 3e^3/8)
        <x2/r^7> = (a^3/b^9) (2e + 3e^3/2)
    """
    a, b, e = elements.a, elements.b, elements.e
    if power == 5:
        return a / b ** 5 * e
    if power == 6:
        return a * a / b ** 7 * (1.5 * e + 0.375 * e ** 3)
    if power == 7:
        return a ** 3 / b ** 9 * (2.0 * e + 1.5 * e ** 3)
    raise ConfigurationError(f"closed forms cover powers 5, 6, 7; got {power}")


def precession_closed_form(method: MethodId, elements: OrbitElements,
                           h: float) -> PrecessionPrediction:
    """Leading-order apsis rotation per revolution at step h.

    sv:  -sign(L) (pi/24) (15 a^3/b^6 - 3 a/b^4) h^2
    mp:  exactly -2 times the sv rate
    ml, lc, dec, fr: zero at this order (leading error order 4).
    """
    if not (h >= 0.0 and math.isfinite(h)):
        raise ConfigurationError(f"step size must be nonnegative, got {h}")
    if method in (MethodId.SV, MethodId.MP):
        a, b = elements.a, elements.b
        shape = 15.0 * a ** 3 / b ** 6 - 3.0 * a / b ** 4
        base = -math.copysign(1.0, elements.L) * math.pi / 24.0 * shape * h * h
        rate = base if method is MethodId.SV else -2.0 * base
        return PrecessionPrediction(method, rate, 2, PrecessionFormula.CLOSED_FORM)
    return PrecessionPrediction(method, 0.0, 4, PrecessionFormula.CLOSED_FORM)


def precession_quadrature(method: MethodId, elements: OrbitElements, h: float,
                          nodes: int = DEFAULT_AVERAGE_NODES) -> PrecessionPrediction:
    """Apsis rotation per revolution from the orbit-averaged perturbation.

    rate = -(2 eps T / e) <field . xi>  with eps = h^2/24, the average taken
    with the apsis line rotated onto the +x2 axis (where the closed-form
    averages live).  The result is orientation independent.
    """
    if method not in _LAGRANGIAN_BRACKET:
        raise ConfigurationError(
            f"quadrature prediction available for sv and mp only, got {method.value}"
        )
    if not (h >= 0.0 and math.isfinite(h)):
        raise ConfigurationError(f"step size must be nonnegative, got {h}")
    if elements.e <= 0.0:
        raise ConfigurationError("quadrature prediction needs an eccentric orbit")
    oriented = elements.with_apsis_angle(0.5 * math.pi)

    def integrand(state: State) -> float:
        f = perturbation_field(method, state)
        xi = lrl_symmetry_field(state)
        return f.x1 * xi.x1 + f.x2 * xi.x2

    avg = orbit_average(integrand, oriented, nodes)
    eps = h * h / 24.0
    rate = -2.0 * eps * oriented.T / oriented.e * avg
    return PrecessionPrediction(method, rate, 2, PrecessionFormula.QUADRATURE)
