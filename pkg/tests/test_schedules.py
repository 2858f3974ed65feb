import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from lrlandscape.schedules import (Schedule, annealed_temperature_on_clock,
                                   annealed_temperature_power_law, clock, effective_temperature,
                                   equivalent_temperature, eta_at, integrated_eta,
                                   schedule_from_dict, time_of_clock)

eta0s = st.floats(0.01, 2.0)
betas = st.floats(0.0, 1.0)


@st.composite
def schedules(draw):
    kind = draw(st.sampled_from(["constant", "power", "switch"]))
    eta0 = draw(eta0s)
    if kind == "constant":
        return Schedule.constant(eta0)
    beta = draw(betas)
    t_start = draw(st.floats(0.1, 5.0))
    if kind == "power":
        return Schedule.power(eta0, beta, t_start)
    return Schedule.switch(eta0, max(beta, 0.05), draw(st.floats(0.0, 50.0)), max(t_start, 1.0))


def _breakpoints(s, a, b):
    pts = [s.t_start + s.decay_origin, s.decay_origin]
    return [p for p in pts if a < p < b] or None


def test_eta_examples():
    assert eta_at(Schedule.power(0.1, 0.5), 4.0) == pytest.approx(0.05, rel=1e-15)
    assert eta_at(Schedule.power(0.3, 0.0), 17.0) == 0.3
    assert eta_at(Schedule.switch(0.1, 0.8, 80.0), 50.0) == 0.1


def test_eta_shift_keeps_origin_finite():
    s = Schedule.power(0.1, 0.5)
    assert eta_at(s, 0.0) == 0.1
    assert eta_at(s, 0.5) == 0.1
    assert eta_at(Schedule.switch(0.1, 0.5, 10.0), 14.0) == pytest.approx(0.05)


def test_eta_vectorised_matches_scalar():
    s = Schedule.switch(0.2, 0.7, 5.0)
    t = np.linspace(0, 40, 101)
    v = eta_at(s, t)
    assert v.shape == t.shape
    np.testing.assert_allclose(v, [eta_at(s, x) for x in t], rtol=1e-15)


@pytest.mark.parametrize("kw", [dict(eta0=0.0), dict(eta0=-1.0), dict(beta=-0.1), dict(beta=1.5),
                                dict(kind="cosine"), dict(t_start=0.0)])
def test_invalid_parameters_rejected_at_construction(kw):
    base = dict(kind="power", eta0=0.1, beta=0.5)
    base.update(kw)
    with pytest.raises(ValueError):
        Schedule(**base)


def test_switch_needs_decay():
    with pytest.raises(ValueError):
        Schedule.switch(0.1, 0.0, 10.0)
    with pytest.raises(ValueError):
        Schedule.switch(0.1, 0.5, 10.0, t_start=0.5)


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        eta_at(Schedule.constant(0.1), -1.0)


def test_integral_examples():
    assert integrated_eta(Schedule.power(1.0, 1.0), 1.0, math.e) == pytest.approx(1.0, rel=1e-15)
    assert integrated_eta(Schedule.constant(0.1), 0.0, 10.0) == pytest.approx(1.0, rel=1e-15)
    s = Schedule.power(0.5, 0.5)
    assert integrated_eta(s, 1.0, 9.0) == pytest.approx(2.0, rel=1e-15)
    assert quad(lambda t: eta_at(s, t), 1.0, 9.0, epsabs=0, epsrel=1e-13)[0] == pytest.approx(2.0, rel=1e-12)


def test_integral_through_flat_segment():
    s = Schedule.power(1.0, 0.5, t_start=4.0)
    # 0.5 * 4 on [0, 4], then 2 (sqrt(9) - sqrt(4)) on [4, 9]
    assert integrated_eta(s, 0.0, 9.0) == pytest.approx(2.0 + 2.0, rel=1e-15)


def test_integral_range_errors():
    s = Schedule.power(0.1, 0.5)
    with pytest.raises(ValueError):
        integrated_eta(s, 2.0, 1.0)
    with pytest.raises(ValueError):
        integrated_eta(s, -1.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(schedules(), st.floats(0.0, 100.0), st.floats(0.0, 100.0), st.floats(0.0, 100.0))
def test_integral_additivity(s, x, y, z):
    a, b, c = sorted((x, y, z))
    whole = integrated_eta(s, a, c)
    parts = integrated_eta(s, a, b) + integrated_eta(s, b, c)
    assert abs(whole - parts) <= 1e-12 * max(abs(whole), 1e-300) + 1e-300


@settings(max_examples=100, deadline=None)
@given(schedules(), st.floats(0.0, 50.0), st.floats(0.01, 200.0))
def test_integral_matches_quadrature(s, a, length):
    b = a + length
    exact = integrated_eta(s, a, b)
    num, _ = quad(lambda t: eta_at(s, t), a, b, points=_breakpoints(s, a, b),
                  epsabs=0, epsrel=1e-12, limit=200)
    assert exact == pytest.approx(num, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(schedules(), st.floats(0.0, 1e4), st.floats(0.0, 1e4))
def test_eta_non_increasing(s, t1, t2):
    lo, hi = sorted((t1, t2))
    assert eta_at(s, lo) >= eta_at(s, hi)


@settings(max_examples=200, deadline=None)
@given(schedules(), st.floats(0.0, 1e3))
def test_clock_inverse(s, t):
    u = clock(s, t)
    assert time_of_clock(s, u) == pytest.approx(t, rel=1e-9, abs=1e-9)


def test_clock_vectorised():
    s = Schedule.power(0.1, 0.5)
    t = np.array([0.0, 1.0, 4.0, 100.0])
    np.testing.assert_allclose(clock(s, t), [0.0, 0.1, 0.1 + 0.2 * (2 - 1), 0.1 + 0.2 * (10 - 1)],
                               rtol=1e-14)
    np.testing.assert_allclose(time_of_clock(s, clock(s, t)), t, rtol=1e-12)


def test_effective_temperature_examples():
    s = Schedule.power(0.1, 0.5)
    assert effective_temperature(s, 1.0, 4.0) == pytest.approx(0.0625, rel=1e-15)
    assert effective_temperature(s, 0.0, 7.0) == 0.0
    np.testing.assert_array_equal(effective_temperature(s, 0.0, np.array([1.0, 3.0])), 0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 10.0), st.floats(1e-6, 1e6))
def test_effective_temperature_identity_at_beta_zero(T, t):
    assert effective_temperature(Schedule.power(0.3, 0.0), T, t) == T


def test_effective_temperature_domain():
    with pytest.raises(ValueError):
        effective_temperature(Schedule.power(0.1, 1.0), 1.0, 2.0)
    with pytest.raises(ValueError):
        effective_temperature(Schedule.power(0.1, 0.5), 1.0, 0.0)
    with pytest.raises(ValueError):
        effective_temperature(Schedule.power(0.1, 0.5), -1.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 0.95), st.floats(0.01, 2.0), st.floats(1.0, 1e4), st.floats(0.0, 5.0))
def test_power_law_annealing_equals_rate_ratio(beta, eta0, t, T):
    # the rescaled-clock closed form and T * eta(t) / eta0 are the same function of t
    s = Schedule.power(eta0, beta)
    rt = eta0 * t ** (1 - beta) / (1 - beta)
    lhs = annealed_temperature_power_law(T, eta0, beta, rt)
    assert lhs == pytest.approx(equivalent_temperature(s, T, t), rel=1e-9, abs=1e-300)


def test_two_closed_forms_differ_for_decaying_rates():
    # the (1-beta)**(1/(1-beta)) form is not the rate ratio except at beta = 0
    s = Schedule.power(0.1, 0.5)
    assert effective_temperature(s, 1.0, 4.0) == pytest.approx(0.0625)
    assert equivalent_temperature(s, 1.0, 4.0) == pytest.approx(0.5)
    s0 = Schedule.power(0.1, 0.0)
    assert effective_temperature(s0, 1.0, 4.0) == equivalent_temperature(s0, 1.0, 4.0)


def test_annealed_temperature_on_clock():
    s = Schedule.power(0.1, 0.5)
    # clock u = integral eta / eta0; at t = 9 the clock reads 1 + 2 (3 - 1) = 5
    assert annealed_temperature_on_clock(s, 1.0, 5.0) == pytest.approx(1.0 / 3.0, rel=1e-12)
    assert annealed_temperature_on_clock(s, 2.0, 0.5) == pytest.approx(2.0)


def test_schedule_from_dict():
    s = schedule_from_dict({"kind": "switch", "eta0": 0.1, "beta": 0.8, "t_switch": 80})
    assert s == Schedule.switch(0.1, 0.8, 80.0)
    assert schedule_from_dict({}) == Schedule.constant(0.1)
    with pytest.raises(ValueError):
        schedule_from_dict({"kind": "power", "gamma": 1.0})
