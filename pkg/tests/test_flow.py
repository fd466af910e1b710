import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gscert.errors import DegenerateOrbit, InsufficientSamples, PreconditionError, StepUnderflow
from gscert.expr import parse
from gscert.field import VectorField
from gscert.flow import (
    Direction,
    IntegratorConfig,
    Method,
    Orbit,
    Termination,
    fit_sink_rate,
    integrate,
    lyapunov_check,
    maximal_interval_estimate,
)

DECAY = VectorField.parse("-x1")
GROWTH = VectorField.parse("x1")


def test_adaptive_exponential_decay():
    orbit = integrate(DECAY, [1.0], IntegratorConfig(t_max=1.0))
    assert orbit.termination is Termination.T_MAX
    assert orbit.final_time == 1.0
    assert orbit.final_state[0] == pytest.approx(math.exp(-1.0), abs=1e-9)


def test_adaptive_2d_linear_closed_form():
    # x' = A x with A = [[0, 1], [-1, -0.5]]: compare against the matrix exponential via eigendecomposition
    a = np.array([[0.0, 1.0], [-1.0, -0.5]])
    x0 = np.array([0.3, 0.2])
    w, v = np.linalg.eig(a)
    exact = (v @ np.diag(np.exp(w * 2.0)) @ np.linalg.inv(v) @ x0).real
    orbit = integrate(VectorField.linear(a), x0, IntegratorConfig(t_max=2.0))
    assert np.allclose(orbit.final_state, exact, atol=1e-9)


def test_fixed_rk4_is_fourth_order():
    errors = []
    for h in (0.1, 0.05, 0.025):
        cfg = IntegratorConfig(method=Method.RK4, step=h, t_max=1.0)
        errors.append(abs(integrate(DECAY, [1.0], cfg).final_state[0] - math.exp(-1.0)))
    for coarse, fine in zip(errors, errors[1:]):
        assert 12.0 <= coarse / fine <= 20.0


def test_singular_start_gives_constant_orbit():
    orbit = integrate(GROWTH, [0.0], IntegratorConfig(t_max=5.0))
    assert np.all(orbit.states == 0.0)
    assert orbit.termination in (Termination.CONVERGED, Termination.T_MAX)


def test_escape_time_is_located_on_the_sphere():
    orbit = integrate(GROWTH, [0.01], IntegratorConfig(escape_radius=1.0))
    assert orbit.termination is Termination.LEFT_DOMAIN
    assert orbit.final_time == pytest.approx(math.log(100.0), abs=1e-7)
    assert orbit.final_state[0] == pytest.approx(1.0, abs=1e-9)


def test_backward_flow_of_source_converges():
    orbit = integrate(GROWTH, [0.5], IntegratorConfig(), Direction.BACKWARD)
    assert orbit.termination is Termination.CONVERGED
    assert orbit.target == (0.0,)
    assert np.all(np.diff(orbit.times) > 0)
    t = orbit.times
    assert np.allclose(orbit.states[:, 0], 0.5 * np.exp(-t), rtol=1e-7, atol=1e-11)


def test_start_outside_escape_radius_is_rejected():
    with pytest.raises(PreconditionError):
        integrate(GROWTH, [2.0], IntegratorConfig(escape_radius=1.0))


def test_step_underflow_carries_partial_orbit():
    # x' = 1 + x^2 - stiff enough with a huge tolerance demand and a large min step
    cfg = IntegratorConfig(rel_tol=1e-16, abs_tol=1e-300, min_step=0.05, max_step=0.5, escape_radius=1e9)
    with pytest.raises(StepUnderflow) as info:
        integrate(VectorField.parse("1 + x1^2"), [0.0], cfg)
    assert info.value.orbit.termination is Termination.UNDERFLOW


@given(st.floats(-0.9, 0.9), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
@settings(max_examples=30, deadline=None)
def test_semigroup_property(x0, s, t):
    field = VectorField.parse("-x1 + 0.3*sin(x1)")
    cfg = IntegratorConfig(escape_radius=2.0)
    direct = integrate(field, [x0], cfg.replace(t_max=s + t)).final_state
    mid = integrate(field, [x0], cfg.replace(t_max=s)).final_state
    composed = integrate(field, mid, cfg.replace(t_max=t)).final_state
    assert np.allclose(direct, composed, atol=1e-9)


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.1, 1.5))
@settings(max_examples=30, deadline=None)
def test_backward_undoes_forward(a, b, t):
    field = VectorField.parse("x2, -x1 - 0.2*x2")
    cfg = IntegratorConfig(escape_radius=10.0, t_max=t)
    there = integrate(field, [a, b], cfg)
    back = integrate(field, there.final_state, cfg, Direction.BACKWARD)
    assert np.allclose(back.final_state, [a, b], atol=1e-9)


def test_maximal_interval_of_source():
    est = maximal_interval_estimate(GROWTH, [0.5])
    assert est.plus_status == "escaped"
    assert est.t_plus == pytest.approx(math.log(2.0), abs=1e-7)
    assert est.minus_status == "converged"
    assert est.t_minus == -math.inf


def test_maximal_interval_of_blowup():
    # x' = x^2 from 0.5: x(t) = 1/(2 - t) reaches 10 at t = 1.9
    est = maximal_interval_estimate(VectorField.parse("x1^2"), [0.5], IntegratorConfig(escape_radius=10.0))
    assert est.t_plus == pytest.approx(1.9, abs=1e-7)


def test_sink_rate_fit_closed_form():
    orbit = integrate(VectorField.parse("-2*x1"), [1.0], IntegratorConfig(escape_radius=2.0))
    assert orbit.termination is Termination.CONVERGED
    fit = fit_sink_rate(orbit)
    assert fit.lam == pytest.approx(2.0, abs=1e-5)
    assert 0.98 <= fit.theta <= 1.05
    assert np.all(fit.distances <= fit.bound(fit.times) * (1 + 1e-12))


def test_sink_rate_picks_slowest_mode():
    # eigenvalues -1 and -3; a generic start decays like e^-t
    orbit = integrate(VectorField.parse("-x1, -3*x2"), [0.4, 0.4], IntegratorConfig())
    assert fit_sink_rate(orbit).lam == pytest.approx(1.0, abs=1e-3)


def test_sink_rate_about_nonzero_singularity():
    field = VectorField.parse("-(x1 - 0.25)")
    orbit = integrate(field, [0.75], IntegratorConfig())
    assert orbit.termination is Termination.CONVERGED
    assert orbit.target[0] == pytest.approx(0.25, abs=1e-12)
    assert fit_sink_rate(orbit).lam == pytest.approx(1.0, abs=1e-4)


def test_sink_rate_preconditions():
    with pytest.raises(PreconditionError):
        fit_sink_rate(integrate(DECAY, [1.0], IntegratorConfig(t_max=1.0)))
    converged = integrate(DECAY, [1.0], IntegratorConfig())
    with pytest.raises(InsufficientSamples):
        fit_sink_rate(converged, min_samples=10_000)
    with pytest.raises(DegenerateOrbit):
        fit_sink_rate(integrate(DECAY, [0.0], IntegratorConfig()))


def test_lyapunov_for_negated_source():
    v = parse("x1^2 + x2^2", 2)
    rep = lyapunov_check(VectorField.parse("-x1, -x2"), v, 1.0)
    assert rep.verdict
    assert rep.min_inner_product == pytest.approx(2e-6, rel=1e-12)
    assert not lyapunov_check(VectorField.parse("x2, -x1"), v, 1.0).verdict


def test_lyapunov_requires_minimum():
    with pytest.raises(PreconditionError):
        lyapunov_check(DECAY, parse("-x1^2", 1), 1.0)


def test_orbit_csv_round_trip():
    orbit = integrate(GROWTH, [0.5], IntegratorConfig(), Direction.BACKWARD)
    text = orbit.to_csv()
    assert text.splitlines()[0] == "t,x1"
    back = Orbit.from_csv(text)
    assert np.array_equal(back.times, orbit.times)
    assert np.array_equal(back.states, orbit.states)
    assert back.direction is orbit.direction
    assert back.termination is orbit.termination
    assert back.target == orbit.target
    assert back.to_csv() == text
