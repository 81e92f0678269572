import math

import numpy as np
import pytest

from keplerlab import (
    ConfigurationError,
    ExactOrbit,
    MethodId,
    ModifiedModel,
    OrbitElements,
    PlanarVector,
    PrecessionFormula,
    SingularMassMatrix,
    State,
    force,
    integrate_modified,
    lrl_symmetry_field,
    modified_acceleration,
    modified_lagrangian,
    orbit_average,
    orbit_average_closed_form,
    perihelion_state,
    perturbation_field,
    precession_closed_form,
    precession_quadrature,
)

from conftest import V0, X0, assert_close, assert_vector_close

HALF_PI = 0.5 * math.pi

# frozen against a 50-digit evaluation of the corrected Lagrangian at
# x=(1.1,-0.3), v=(0.2,0.8), h=0.4
MODLAG_STATE = State(PlanarVector(1.1, -0.3), PlanarVector(0.2, 0.8))
MODLAG_BASE = 1.2170580193070292
MODLAG_SV = 1.2148941785224592
MODLAG_MP = 1.2240570994626278

# frozen closed-form rates for the reference orbit at h = 0.5
RATE_SV_HALF = 0.067370482295781551
RATE_MP_HALF = -0.1347409645915631

# frozen orbit averages of x2/r^power for the reference shape, apsis on +x2
AVG_ORACLE = {5: 0.02768099789439036, 6: 0.023660169199471011,
              7: 0.018593564858287481}


@pytest.fixture(scope="module")
def oriented_elements(default_elements):
    return default_elements.with_apsis_angle(HALF_PI)


class TestModifiedModel:
    def test_epsilon(self):
        assert ModifiedModel(MethodId.SV, 0.5).epsilon == 0.25 / 24.0
        assert ModifiedModel(MethodId.MP, 0.0).epsilon == 0.0

    def test_only_sv_and_mp(self):
        for m in (MethodId.ML, MethodId.LC, MethodId.DEC, MethodId.FR):
            with pytest.raises(ConfigurationError):
                ModifiedModel(m, 0.5)

    def test_step_validation(self):
        with pytest.raises(ConfigurationError):
            ModifiedModel(MethodId.SV, -0.1)
        with pytest.raises(ConfigurationError):
            ModifiedModel(MethodId.SV, math.nan)


class TestModifiedLagrangian:
    def test_frozen_values(self):
        assert_close(modified_lagrangian(ModifiedModel(MethodId.SV, 0.0), MODLAG_STATE),
                     MODLAG_BASE, rtol=1e-14)
        assert_close(modified_lagrangian(ModifiedModel(MethodId.SV, 0.4), MODLAG_STATE),
                     MODLAG_SV, rtol=1e-14)
        assert_close(modified_lagrangian(ModifiedModel(MethodId.MP, 0.4), MODLAG_STATE),
                     MODLAG_MP, rtol=1e-14)

    def test_correction_scales_with_h_squared(self):
        base = modified_lagrangian(ModifiedModel(MethodId.SV, 0.0), MODLAG_STATE)
        d1 = modified_lagrangian(ModifiedModel(MethodId.SV, 0.2), MODLAG_STATE) - base
        d2 = modified_lagrangian(ModifiedModel(MethodId.SV, 0.4), MODLAG_STATE) - base
        assert_close(d2, 4.0 * d1, rtol=1e-10)


class TestModifiedAcceleration:
    def test_reduces_to_kepler_force_at_zero_step(self):
        model = ModifiedModel(MethodId.SV, 0.0)
        for state in (MODLAG_STATE, State(X0, V0)):
            acc = modified_acceleration(model, state)
            assert_vector_close(acc, force(state.position), tol=1e-14)

    def test_stays_within_three_percent_of_force(self, default_state):
        # even at the coarse headline step the correction is a small perturbation
        orbit = ExactOrbit(default_state)
        for method in (MethodId.SV, MethodId.MP):
            model = ModifiedModel(method, 0.5)
            for t in np.linspace(0.0, orbit.elements.T, 24, endpoint=False):
                s = orbit.state_at(float(t))
                acc = modified_acceleration(model, s)
                f = force(s.position)
                assert (acc - f).norm() <= 0.03 * f.norm()

    @pytest.mark.parametrize("method", [MethodId.SV, MethodId.MP])
    def test_euler_lagrange_residual_vanishes(self, method):
        # independent check of the whole algebra: along a trajectory driven by
        # modified_acceleration, d/dt dL/dv - dL/dx must vanish, with both
        # derivatives taken from modified_lagrangian by finite differences
        model = ModifiedModel(method, 0.4)
        delta = 1e-5

        def lag(x1, x2, v1, v2):
            return modified_lagrangian(
                model, State(PlanarVector(x1, x2), PlanarVector(v1, v2)))

        def grad_v(x, v):
            return np.array([
                (lag(x[0], x[1], v[0] + delta, v[1]) - lag(x[0], x[1], v[0] - delta, v[1])),
                (lag(x[0], x[1], v[0], v[1] + delta) - lag(x[0], x[1], v[0], v[1] - delta)),
            ]) / (2 * delta)

        def grad_x(x, v):
            return np.array([
                (lag(x[0] + delta, x[1], v[0], v[1]) - lag(x[0] - delta, x[1], v[0], v[1])),
                (lag(x[0], x[1] + delta, v[0], v[1]) - lag(x[0], x[1] - delta, v[0], v[1])),
            ]) / (2 * delta)

        def rk4(x, v, dt):
            def acc(x_, v_):
                a = modified_acceleration(model, State(PlanarVector(*x_), PlanarVector(*v_)))
                return np.array([a.x1, a.x2])
            k1x, k1v = v, acc(x, v)
            k2x, k2v = v + 0.5 * dt * k1v, acc(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
            k3x, k3v = v + 0.5 * dt * k2v, acc(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
            k4x, k4v = v + dt * k3v, acc(x + dt * k3x, v + dt * k3v)
            return (x + dt * (k1x + 2 * k2x + 2 * k3x + k4x) / 6,
                    v + dt * (k1v + 2 * k2v + 2 * k3v + k4v) / 6)

        x0 = np.array([1.4, -0.5])
        u0 = np.array([0.3, 0.7])
        dt = 1e-3
        xp, vp = rk4(x0, u0, dt)
        xm, vm = rk4(x0, u0, -dt)
        dp_dt = (grad_v(xp, vp) - grad_v(xm, vm)) / (2 * dt)
        residual = dp_dt - grad_x(x0, u0)
        assert np.abs(residual).max() < 1e-5

    def test_singular_mass_matrix_detected(self):
        # at r^3 = 4 eps the sv velocity Hessian has a zero eigenvalue
        model = ModifiedModel(MethodId.SV, 0.5)
        r = (4.0 * model.epsilon) ** (1.0 / 3.0)
        with pytest.raises(SingularMassMatrix):
            modified_acceleration(model, State(PlanarVector(r, 0.0), PlanarVector(0.0, 1.0)))


class TestSymmetryAndPerturbationFields:
    def test_lrl_symmetry_field_spot_value(self):
        xi = lrl_symmetry_field(State(PlanarVector(1.5, -0.4), PlanarVector(0.3, 0.9)))
        assert_vector_close(xi, (0.18, 1.41), tol=1e-15)

    def test_perturbation_field_spot_values(self):
        # x on the x1 axis, velocity transverse: the s-dependent terms drop
        state = State(PlanarVector(2.0, 0.0), PlanarVector(0.0, 0.7))
        f_sv = perturbation_field(MethodId.SV, state)
        f_mp = perturbation_field(MethodId.MP, state)
        assert_vector_close(f_sv, (4.0 / 2 ** 5 - 6.0 * 0.49 / 2 ** 4, 0.0), tol=1e-15)
        assert_vector_close(f_mp, (-8.0 / 2 ** 5 + 3.0 * 0.49 / 2 ** 4, 0.0), tol=1e-15)

    def test_perturbation_field_limited_to_sv_mp(self):
        state = State(PlanarVector(2.0, 0.0), PlanarVector(0.0, 0.7))
        for m in (MethodId.ML, MethodId.LC, MethodId.DEC, MethodId.FR):
            with pytest.raises(ConfigurationError):
                perturbation_field(m, state)


class TestOrbitAverage:
    def test_frozen_closed_forms(self, oriented_elements):
        for power, want in AVG_ORACLE.items():
            assert_close(orbit_average_closed_form(power, oriented_elements), want,
                         rtol=1e-12)

    def test_quadrature_matches_closed_forms(self, oriented_elements):
        for power, want in AVG_ORACLE.items():
            got = orbit_average(
                lambda s, p=power: s.position.x2 / s.position.norm() ** p,
                oriented_elements)
            assert_close(got, want, rtol=1e-10)

    def test_unsupported_power(self, oriented_elements):
        with pytest.raises(ConfigurationError):
            orbit_average_closed_form(4, oriented_elements)

    def test_apsis_on_x1_axis_kills_odd_integrand(self, default_elements):
        # with the apsis on +x1 the orbit is symmetric under x2 -> -x2
        got = orbit_average(lambda s: s.position.x2 / s.position.norm() ** 5,
                            default_elements)
        assert abs(got) < 1e-12

    def test_node_doubling_is_converged(self, oriented_elements):
        f = lambda s: s.position.x2 / s.position.norm() ** 5
        a = orbit_average(f, oriented_elements, nodes=2048)
        b = orbit_average(f, oriented_elements, nodes=4096)
        assert abs(a - b) < 1e-9

    def test_minimum_node_count(self, oriented_elements):
        with pytest.raises(ConfigurationError):
            orbit_average(lambda s: 1.0, oriented_elements, nodes=32)

    def test_total_derivative_averages_to_zero(self, oriented_elements):
        # <d/dt f> = 0 for periodic motion; f = v2/r^3 gives
        # df/dt = -x2/r^6 - 3 v2 <x,v> / r^5
        def ddt(s):
            r = s.position.norm()
            svel = s.position.dot(s.velocity)
            return -s.position.x2 / r ** 6 - 3.0 * s.velocity.x2 * svel / r ** 5
        assert abs(orbit_average(ddt, oriented_elements)) < 1e-12

    def test_constant_averages_to_itself(self, oriented_elements):
        assert_close(orbit_average(lambda s: 2.5, oriented_elements), 2.5, rtol=1e-15)


class TestPrecessionClosedForm:
    def test_frozen_rates(self, default_elements):
        sv = precession_closed_form(MethodId.SV, default_elements, 0.5)
        mp = precession_closed_form(MethodId.MP, default_elements, 0.5)
        assert_close(sv.rate_per_revolution, RATE_SV_HALF, rtol=1e-13)
        assert_close(mp.rate_per_revolution, RATE_MP_HALF, rtol=1e-13)
        assert sv.leading_order == 2 and mp.leading_order == 2
        assert sv.formula is PrecessionFormula.CLOSED_FORM

    def test_mp_is_exactly_minus_two_sv(self, default_elements):
        for h in (0.125, 0.25, 0.5, 1.0):
            sv = precession_closed_form(MethodId.SV, default_elements, h)
            mp = precession_closed_form(MethodId.MP, default_elements, h)
            assert mp.rate_per_revolution == -2.0 * sv.rate_per_revolution

    def test_higher_order_methods_have_zero_leading_rate(self, default_elements):
        for m in (MethodId.ML, MethodId.LC, MethodId.DEC, MethodId.FR):
            pred = precession_closed_form(m, default_elements, 0.5)
            assert pred.rate_per_revolution == 0.0
            assert pred.leading_order == 4

    def test_quadratic_step_scaling(self, default_elements):
        r1 = precession_closed_form(MethodId.SV, default_elements, 0.25).rate_per_revolution
        r2 = precession_closed_form(MethodId.SV, default_elements, 0.5).rate_per_revolution
        assert_close(r2, 4.0 * r1, rtol=1e-12)

    def test_sign_follows_orbit_sense(self, default_elements):
        # the reference orbit is clockwise (L < 0) and precesses forward (+);
        # the mirror-image counterclockwise orbit precesses backward
        ccw = OrbitElements.from_shape(default_elements.a, default_elements.e)
        rate_cw = precession_closed_form(MethodId.SV, default_elements, 0.5)
        rate_ccw = precession_closed_form(MethodId.SV, ccw, 0.5)
        assert rate_cw.rate_per_revolution > 0.0
        assert_close(rate_ccw.rate_per_revolution, -rate_cw.rate_per_revolution,
                     rtol=1e-14)

    def test_zero_step(self, default_elements):
        assert precession_closed_form(MethodId.SV, default_elements, 0.0).rate_per_revolution == 0.0
        with pytest.raises(ConfigurationError):
            precession_closed_form(MethodId.SV, default_elements, -0.5)


class TestPrecessionQuadrature:
    def test_matches_closed_form(self, default_elements):
        for method in (MethodId.SV, MethodId.MP):
            for h in (0.25, 0.5):
                quad = precession_quadrature(method, default_elements, h)
                closed = precession_closed_form(method, default_elements, h)
                assert_close(quad.rate_per_revolution, closed.rate_per_revolution,
                             rtol=1e-10)
                assert quad.formula is PrecessionFormula.QUADRATURE
                assert quad.leading_order == 2

    def test_orientation_independent(self, default_elements):
        a = precession_quadrature(MethodId.SV, default_elements, 0.5)
        b = precession_quadrature(MethodId.SV, default_elements.with_apsis_angle(1.0), 0.5)
        assert_close(b.rate_per_revolution, a.rate_per_revolution, rtol=1e-12)

    def test_rejects_circular_orbit(self):
        el = OrbitElements.from_shape(2.0, 0.0)
        with pytest.raises(ConfigurationError):
            precession_quadrature(MethodId.SV, el, 0.5)

    def test_rejects_higher_order_methods(self, default_elements):
        with pytest.raises(ConfigurationError):
            precession_quadrature(MethodId.ML, default_elements, 0.5)


class TestIntegrateModified:
    def test_sample_layout(self):
        model = ModifiedModel(MethodId.SV, 0.5)
        t, X, V = integrate_modified(model, X0, V0, 10.0, 20)
        assert t.shape == (21,) and X.shape == (21, 2) and V.shape == (21, 2)
        assert np.allclose(t, 0.5 * np.arange(21))
        assert np.array_equal(X[0], [X0.x1, X0.x2])
        assert np.array_equal(V[0], [V0.x1, V0.x2])

    def test_zero_step_model_reproduces_exact_orbit(self, default_state):
        model = ModifiedModel(MethodId.SV, 0.0)
        orbit = ExactOrbit(default_state)
        t_end = 2.0 * orbit.elements.T
        t, X, V = integrate_modified(model, X0, V0, t_end, 100)
        Xe, Ve = orbit.states_at(t)
        assert np.hypot(*(X - Xe).T).max() < 1e-7
        assert np.hypot(*(V - Ve).T).max() < 1e-7

    def test_energy_of_modified_flow_is_conserved(self):
        # the modified system is autonomous Lagrangian: its own energy
        # v . dL/dv - L must stay constant along the RK4 solution
        model = ModifiedModel(MethodId.SV, 0.5)
        t, X, V = integrate_modified(model, X0, V0, 40.0, 80)
        delta = 1e-6
        values = []
        for k in range(0, 81, 8):
            x = PlanarVector(*X[k])
            v = PlanarVector(*V[k])
            lag = modified_lagrangian(model, State(x, v))
            dv1 = (modified_lagrangian(model, State(x, PlanarVector(v.x1 + delta, v.x2)))
                   - modified_lagrangian(model, State(x, PlanarVector(v.x1 - delta, v.x2)))) / (2 * delta)
            dv2 = (modified_lagrangian(model, State(x, PlanarVector(v.x1, v.x2 + delta)))
                   - modified_lagrangian(model, State(x, PlanarVector(v.x1, v.x2 - delta)))) / (2 * delta)
            values.append(v.x1 * dv1 + v.x2 * dv2 - lag)
        values = np.array(values)
        assert np.abs(values - values[0]).max() < 1e-8

    def test_validation(self):
        model = ModifiedModel(MethodId.SV, 0.5)
        with pytest.raises(ConfigurationError):
            integrate_modified(model, X0, V0, 0.0, 10)
        with pytest.raises(ConfigurationError):
            integrate_modified(model, X0, V0, 10.0, 0)
        with pytest.raises(ConfigurationError):
            integrate_modified(model, X0, V0, 10.0, 10, reference_step=0.0)
