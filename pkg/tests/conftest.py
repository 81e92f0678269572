import math

import pytest

from keplerlab import OrbitElements, PlanarVector, State, elements_from_state

# Reference orbit used throughout: aphelion start at x=(-3,0), v=(0,0.45).
# Everything about it is exactly representable: E = -557/2400, a = 1200/557,
# e = 157/400, L = -1.35, perihelion radius 729/557.
X0 = PlanarVector(-3.0, 0.0)
V0 = PlanarVector(0.0, 0.45)

REF_E = -557.0 / 2400.0
REF_A = 1200.0 / 557.0
REF_ECC = 0.3925
REF_L = -1.35
REF_B = 1.9815123977421249
REF_T = 19.868676773967703
REF_R_PERI = 729.0 / 557.0
REF_SPEED_PERI = 1.35 * 557.0 / 729.0


@pytest.fixture(scope="session")
def default_state() -> State:
    return State(X0, V0, 0.0)


@pytest.fixture(scope="session")
def default_elements(default_state) -> OrbitElements:
    return elements_from_state(default_state)


def isclose(got, want, rtol=1e-12, atol=0.0):
    return abs(got - want) <= atol + rtol * abs(want)


def assert_close(got, want, rtol=1e-12, atol=0.0, label=""):
    assert isclose(got, want, rtol, atol), f"{label} got {got!r}, want {want!r}"


def assert_vector_close(got, want, tol=1e-12, label=""):
    dist = math.hypot(got[0] - want[0], got[1] - want[1])
    scale = max(1.0, math.hypot(want[0], want[1]))
    assert dist <= tol * scale, f"{label} got {tuple(got)}, want {tuple(want)}"
