"""Planar gravitational two-body problem with unit masses and unit coupling.

Potential U(x) = -1/|x|, Lagrangian L = |xdot|^2/2 + 1/|x|.  This module
carries the conserved quantities (energy, angular momentum, the
Laplace-Runge-Lenz vector), conversion to orbital elements, and a
closed-form Kepler propagator used as the reference solution everywhere
else in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import (
    DegenerateOrbit,
    NearSingularity,
    SolverFailure,
    UnboundOrbit,
)

SINGULARITY_FLOOR = 1e-12
KEPLER_TOLERANCE = 1e-13
KEPLER_MAX_ITERATIONS = 50

# Below this eccentricity the apsis direction is numerically meaningless.
CIRCULAR_ECCENTRICITY = 1e-12

_TWO_PI = 2.0 * math.pi


class PlanarVector(NamedTuple):
    """Point or vector in the orbital plane."""

    x1: float
    x2: float

    def norm(self) -> float:
        return math.hypot(self.x1, self.x2)

    def dot(self, other: "PlanarVector") -> float:
        return self.x1 * other.x1 + self.x2 * other.x2

    def cross(self, other: "PlanarVector") -> float:
        return self.x1 * other.x2 - self.x2 * other.x1

    def scaled(self, factor: float) -> "PlanarVector":
        return PlanarVector(factor * self.x1, factor * self.x2)

    def rotated(self, angle: float) -> "PlanarVector":
        c, s = math.cos(angle), math.sin(angle)
        return PlanarVector(c * self.x1 - s * self.x2, s * self.x1 + c * self.x2)

    def __add__(self, other):  # type: ignore[override]
        return PlanarVector(self.x1 + other.x1, self.x2 + other.x2)

    def __sub__(self, other):
        return PlanarVector(self.x1 - other.x1, self.x2 - other.x2)

    def __neg__(self):
        return PlanarVector(-self.x1, -self.x2)


class State(NamedTuple):
    """Phase-space point (position, velocity) at a time."""

    position: PlanarVector
    velocity: PlanarVector
    time: float = 0.0


def radius(x: PlanarVector, floor: float = SINGULARITY_FLOOR) -> float:
    """|x| with a collision guard: raises NearSingularity below the floor."""
    r = math.hypot(x.x1, x.x2)
    if r < floor:
        raise NearSingularity(f"|x| = {r:.3e} inside the collision guard {floor:.3e}")
    return r


def potential(x: PlanarVector, floor: float = SINGULARITY_FLOOR) -> float:
    """U(x) = -1/|x|."""
    return -1.0 / radius(x, floor)


def potential_gradient(x: PlanarVector, floor: float = SINGULARITY_FLOOR) -> PlanarVector:
    """U'(x) = x/|x|^3.  The force is the negative of this."""
    r = radius(x, floor)
    r3 = r * r * r
    return PlanarVector(x.x1 / r3, x.x2 / r3)


def force(x: PlanarVector, floor: float = SINGULARITY_FLOOR) -> PlanarVector:
    """-U'(x) = -x/|x|^3."""
    r = radius(x, floor)
    r3 = r * r * r
    return PlanarVector(-x.x1 / r3, -x.x2 / r3)


def gradient_jacobian(x: PlanarVector, floor: float = SINGULARITY_FLOOR) -> tuple[float, float, float]:
    """Symmetric Jacobian of U', returned as (j11, j12, j22).

    d U'/dx = (|x|^2 I - 3 x x^T) / |x|^5.
    """
    r2 = x.x1 * x.x1 + x.x2 * x.x2
    r = math.sqrt(r2)
    if r < floor:
        raise NearSingularity(f"|x| = {r:.3e} inside the collision guard {floor:.3e}")
    r5 = r2 * r2 * r
    return (
        (r2 - 3.0 * x.x1 * x.x1) / r5,
        -3.0 * x.x1 * x.x2 / r5,
        (r2 - 3.0 * x.x2 * x.x2) / r5,
    )


def energy(state: State, floor: float = SINGULARITY_FLOOR) -> float:
    """E = |v|^2/2 - 1/|x|; negative exactly on bound orbits."""
    v = state.velocity
    return 0.5 * (v.x1 * v.x1 + v.x2 * v.x2) - 1.0 / radius(state.position, floor)


def angular_momentum(state: State) -> float:
    """L = x1 v2 - v1 x2 (scalar in the plane)."""
    x, v = state.position, state.velocity
    return x.x1 * v.x2 - v.x1 * x.x2


def lrl_vector(state: State, floor: float = SINGULARITY_FLOOR) -> PlanarVector:
    """Laplace-Runge-Lenz vector; |lrl| = e and it points at the perihelion."""
    x, v = state.position, state.velocity
    r = radius(x, floor)
    u = v.x1 * v.x1 + v.x2 * v.x2
    s = x.x1 * v.x1 + x.x2 * v.x2
    return PlanarVector(
        u * x.x1 - s * v.x1 - x.x1 / r,
        u * x.x2 - s * v.x2 - x.x2 / r,
    )


def lrl_angle(state: State, floor: float = SINGULARITY_FLOOR) -> float:
    """Orientation atan2(lrl2, lrl1) of the LRL vector, in (-pi, pi]."""
    lrl = lrl_vector(state, floor)
    return math.atan2(lrl.x2, lrl.x1)


_ELEMENT_RTOL = 1e-12


def _relation_ok(got: float, want: float) -> bool:
    return abs(got - want) <= _ELEMENT_RTOL * max(1.0, abs(want))


@dataclass(frozen=True)
class OrbitElements:
    """Geometry of a bound orbit.

    The fields are redundant on purpose; construction enforces the defining
    relations E = -1/(2a), L^2 = b^2/a, T = 2 pi a^(3/2), e = sqrt(1-b^2/a^2)
    so that a mistyped element fails loudly rather than propagating.
    apsis_angle is the polar angle of the perihelion direction.
    """

    a: float
    b: float
    e: float
    T: float
    E: float
    L: float
    apsis_angle: float = 0.0

    def __post_init__(self):
        if not (self.a > 0.0 and math.isfinite(self.a)):
            raise ValueError(f"semi-major axis must be positive, got {self.a}")
        if not (0.0 < self.b <= self.a * (1.0 + _ELEMENT_RTOL)):
            raise ValueError(f"semi-minor axis must lie in (0, a], got b={self.b}, a={self.a}")
        if not 0.0 <= self.e < 1.0:
            raise ValueError(f"eccentricity must lie in [0, 1), got {self.e}")
        checks = (
            ("E", self.E, -1.0 / (2.0 * self.a)),
            ("T", self.T, _TWO_PI * self.a ** 1.5),
            ("L^2", self.L * self.L, self.b * self.b / self.a),
            # validated in b-space: recovering e from b is ill-conditioned
            # near circularity (the roundoff blows up by 1/e)
            ("b", self.b, self.a * math.sqrt(max(0.0, 1.0 - self.e * self.e))),
        )
        for name, got, want in checks:
            if not _relation_ok(got, want):
                raise ValueError(f"inconsistent elements: {name} = {got}, expected {want}")

    @classmethod
    def from_shape(cls, a: float, e: float, counterclockwise: bool = True,
                   apsis_angle: float = 0.0) -> "OrbitElements":
        """Build consistent elements from the shape pair (a, e)."""
        if not (a > 0.0 and math.isfinite(a)):
            raise ValueError(f"semi-major axis must be positive, got {a}")
        if not 0.0 <= e < 1.0:
            raise ValueError(f"eccentricity must lie in [0, 1), got {e}")
        b = a * math.sqrt(1.0 - e * e)
        magL = math.sqrt(b * b / a)
        return cls(
            a=a,
            b=b,
            e=e,
            T=_TWO_PI * a ** 1.5,
            E=-1.0 / (2.0 * a),
            L=magL if counterclockwise else -magL,
            apsis_angle=apsis_angle,
        )

    def with_apsis_angle(self, angle: float) -> "OrbitElements":
        return replace(self, apsis_angle=angle)


def elements_from_state(state: State, floor: float = SINGULARITY_FLOOR) -> OrbitElements:
    """Orbital elements of the bound orbit through a phase-space point.

    Raises UnboundOrbit when E >= 0 and DegenerateOrbit when L = 0.
    """
    E = energy(state, floor)
    L = angular_momentum(state)
    if E >= 0.0:
        raise UnboundOrbit(f"energy {E:.6g} is nonnegative; orbit is not bound")
    if L == 0.0:
        raise DegenerateOrbit("zero angular momentum: radial orbit")
    a = -1.0 / (2.0 * E)
    b = math.sqrt(L * L * a)
    e = math.sqrt(max(0.0, 1.0 - (b / a) ** 2))
    lrl = lrl_vector(state, floor)
    if math.hypot(lrl.x1, lrl.x2) > CIRCULAR_ECCENTRICITY:
        apsis = math.atan2(lrl.x2, lrl.x1)
    else:
        apsis = 0.0
    return OrbitElements(a=a, b=min(b, a), e=e, T=_TWO_PI * a ** 1.5, E=E, L=L,
                         apsis_angle=apsis)


def perihelion_state(elements: OrbitElements) -> State:
    """State at perihelion passage, taken as time 0.

    Position is at distance a(1-e) along the apsis direction; speed there is
    |L|/r with the velocity perpendicular, signed by the orbit's sense.
    """
    rp = elements.a * (1.0 - elements.e)
    speed = abs(elements.L) / rp
    p = PlanarVector(math.cos(elements.apsis_angle), math.sin(elements.apsis_angle))
    if elements.L > 0.0:
        q = PlanarVector(-p.x2, p.x1)
    else:
        q = PlanarVector(p.x2, -p.x1)
    return State(p.scaled(rp), q.scaled(speed), 0.0)


def solve_kepler(mean_anomaly: float, e: float, tol: float = KEPLER_TOLERANCE,
                 max_iterations: int = KEPLER_MAX_ITERATIONS) -> float:
    """Solve M = Ecc - e sin(Ecc) for the eccentric anomaly in [0, 2 pi).

    Newton iteration from the classic guess M + e sin(M), safeguarded by a
    shrinking bisection bracket; g(Ecc) = Ecc - e sin(Ecc) is increasing for
    e < 1 so the bracket is always valid.
    """
    if not 0.0 <= e < 1.0:
        raise ValueError(f"eccentricity must lie in [0, 1), got {e}")
    M = math.fmod(mean_anomaly, _TWO_PI)
    if M < 0.0:
        M += _TWO_PI
    lo, hi = 0.0, _TWO_PI
    ecc_anom = M + e * math.sin(M)
    for _ in range(max_iterations):
        f = ecc_anom - e * math.sin(ecc_anom) - M
        if abs(f) < tol:
            return ecc_anom
        if f < 0.0:
            lo = max(lo, ecc_anom)
        else:
            hi = min(hi, ecc_anom)
        ecc_anom -= f / (1.0 - e * math.cos(ecc_anom))
        if not lo <= ecc_anom <= hi:
            ecc_anom = 0.5 * (lo + hi)
    raise SolverFailure(
        f"Kepler equation did not converge: M={mean_anomaly!r}, e={e!r}, "
        f"residual tolerance {tol}, {max_iterations} iterations"
    )


def _solve_kepler_batch(mean_anomaly: np.ndarray, e: float, tol: float,
                        max_iterations: int) -> np.ndarray:
    """Vectorized variant of solve_kepler for arrays of mean anomalies."""
    M = np.mod(np.asarray(mean_anomaly, dtype=float), _TWO_PI)
    lo = np.zeros_like(M)
    hi = np.full_like(M, _TWO_PI)
    ecc = M + e * np.sin(M)
    for _ in range(max_iterations):
        f = ecc - e * np.sin(ecc) - M
        done = np.abs(f) < tol
        if done.all():
            return ecc
        lo = np.where(~done & (f < 0.0), np.maximum(lo, ecc), lo)
        hi = np.where(~done & (f >= 0.0), np.minimum(hi, ecc), hi)
        trial = ecc - f / (1.0 - e * np.cos(ecc))
        trial = np.where((trial < lo) | (trial > hi), 0.5 * (lo + hi), trial)
        ecc = np.where(done, ecc, trial)
    raise SolverFailure(
        f"Kepler equation did not converge on a batch of {M.size} anomalies (e={e!r})"
    )


class ExactOrbit:
    """Closed-form propagator for a bound initial state.

    The orbit is parameterized in the perifocal frame (p toward perihelion,
    q 90 degrees ahead in the direction of motion):

        x(Ecc) = a (cos Ecc - e) p + b sin Ecc q,
        M(t)   = M0 + 2 pi (t - t0)/T,

    with the Kepler equation inverted per sample.  For near-circular orbits
    (e below CIRCULAR_ECCENTRICITY) the initial position direction stands in
    for the apsis direction.
    """

    def __init__(self, initial: State, elements: OrbitElements | None = None,
                 floor: float = SINGULARITY_FLOOR):
        own = elements_from_state(initial, floor)
        if elements is not None:
            for name, got, want in (("E", elements.E, own.E), ("L", elements.L, own.L)):
                if abs(got - want) > 1e-10 * max(1.0, abs(want)):
                    raise ValueError(
                        f"provided elements disagree with the initial state: "
                        f"{name} = {got}, state gives {want}"
                    )
        self.initial = initial
        self.elements = own
        x, v = initial.position, initial.velocity
        r0 = radius(x, floor)
        a, e = own.a, own.e
        lrl = lrl_vector(initial, floor)
        m = math.hypot(lrl.x1, lrl.x2)
        # branch on the LRL magnitude itself: for a state circular to
        # roundoff, e recovered from the elements sits at its ~sqrt(eps)
        # noise floor while the LRL vector is exactly zero, so dividing by
        # it would blow up even though e > CIRCULAR_ECCENTRICITY
        if m > CIRCULAR_ECCENTRICITY and e > CIRCULAR_ECCENTRICITY:
            p = PlanarVector(lrl.x1 / m, lrl.x2 / m)
            cos_e0 = (1.0 - r0 / a) / e
            sin_e0 = x.dot(v) / (e * math.sqrt(a))
            ecc0 = math.atan2(sin_e0, cos_e0)
        else:
            p = PlanarVector(x.x1 / r0, x.x2 / r0)
            ecc0 = 0.0
        if own.L > 0.0:
            q = PlanarVector(-p.x2, p.x1)
        else:
            q = PlanarVector(p.x2, -p.x1)
        self._p = p
        self._q = q
        self._mean0 = ecc0 - e * math.sin(ecc0)
        self._rate = _TWO_PI / own.T
        self._t0 = initial.time

    def state_at(self, t: float, tol: float = KEPLER_TOLERANCE,
                 max_iterations: int = KEPLER_MAX_ITERATIONS) -> State:
        el = self.elements
        M = self._mean0 + self._rate * (t - self._t0)
        ecc = solve_kepler(M, el.e, tol, max_iterations)
        cos_e, sin_e = math.cos(ecc), math.sin(ecc)
        xp = el.a * (cos_e - el.e)
        xq = el.b * sin_e
        r = el.a * (1.0 - el.e * cos_e)
        fac = self._rate * el.a / r
        vp = -el.a * sin_e * fac
        vq = el.b * cos_e * fac
        p, q = self._p, self._q
        return State(
            PlanarVector(xp * p.x1 + xq * q.x1, xp * p.x2 + xq * q.x2),
            PlanarVector(vp * p.x1 + vq * q.x1, vp * p.x2 + vq * q.x2),
            t,
        )

    def states_at(self, times, tol: float = KEPLER_TOLERANCE,
                  max_iterations: int = KEPLER_MAX_ITERATIONS) -> tuple[np.ndarray, np.ndarray]:
        """Positions and velocities at an array of times, shape (n, 2) each."""
        el = self.elements
        t = np.asarray(times, dtype=float)
        M = self._mean0 + self._rate * (t - self._t0)
        ecc = _solve_kepler_batch(M, el.e, tol, max_iterations)
        cos_e, sin_e = np.cos(ecc), np.sin(ecc)
        xp = el.a * (cos_e - el.e)
        xq = el.b * sin_e
        r = el.a * (1.0 - el.e * cos_e)
        fac = self._rate * el.a / r
        vp = -el.a * sin_e * fac
        vq = el.b * cos_e * fac
        p, q = self._p, self._q
        X = np.stack([xp * p.x1 + xq * q.x1, xp * p.x2 + xq * q.x2], axis=-1)
        V = np.stack([vp * p.x1 + vq * q.x1, vp * p.x2 + vq * q.x2], axis=-1)
        return X, V


def exact_state_at(elements: OrbitElements, initial: State, t: float,
                   floor: float = SINGULARITY_FLOOR) -> State:
    """Exact state at time t on the orbit through `initial`.

    `elements` must agree with the initial state (energy and angular momentum
    to 1e-10 relative); they are accepted as a cross-check, the propagation
    itself re-derives everything from the state.
    """
    return ExactOrbit(initial, elements, floor).state_at(t)
