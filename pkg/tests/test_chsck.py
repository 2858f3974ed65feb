import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lrlandscape.chsck import (ChsckConfig, IntegrationError, Potential, TwoTimeGrid,
                               channel_threshold_loss, dynamical_temperature, integrate,
                               loss_from_z, optimal_beta, paramagnetic_loss, threshold_loss,
                               threshold_loss_at_temperature, threshold_loss_exact,
                               threshold_overlap)
from lrlandscape.schedules import Schedule


def _pure(p=3, T=1.0, eta=0.5, dt=0.02, n_steps=300, **kw):
    return ChsckConfig(Potential.pure(p), T=T, schedule=Schedule.constant(eta), dt=dt,
                       n_steps=n_steps, **kw)


@pytest.fixture(scope="module")
def small_run():
    return integrate(_pure(record_stride=1))


def test_potential_polynomials():
    pot = Potential.spiked(3, 0.2, 6.0)
    assert float(pot.q(1.0)) == pytest.approx(1 / 0.4 + 1 / 18, rel=1e-15)
    assert float(pot.q(1.0)) == pytest.approx(2.5556, abs=1e-4)
    x = np.linspace(-0.9, 0.9, 7)
    h = 1e-6
    np.testing.assert_allclose(pot.dq(x), (pot.q(x + h) - pot.q(x - h)) / (2 * h), rtol=1e-8, atol=1e-9)
    np.testing.assert_allclose(pot.d2q(x), (pot.dq(x + h) - pot.dq(x - h)) / (2 * h), rtol=1e-8,
                               atol=1e-9)
    pure = Potential.pure(4)
    assert pure.is_pure and not pure.has_matrix
    np.testing.assert_allclose(pure.q(x), x ** 4 / 4)
    assert not pot.is_pure and pot.has_matrix


def test_potential_validation():
    with pytest.raises(ValueError):
        Potential(p=2)
    with pytest.raises(ValueError):
        Potential.spiked(3, 0.0, 1.0)
    with pytest.raises(ValueError):
        Potential.pure(3).q_k(4, 0.5)


def test_config_defaults_and_budget():
    assert _pure().m0 == 0.0
    assert ChsckConfig(Potential.spiked(3, 0.2, 6.0)).m0 == 1e-10
    with pytest.raises(ValueError):
        _pure(m0=-1e-3)
    with pytest.raises(ValueError):
        _pure(n_steps=4000, memory_budget=1 << 20)
    with pytest.raises(ValueError):
        _pure(T=-1.0)


def test_causality_and_diagonal_are_exact(small_run):
    grid, _ = small_run
    n = grid.n
    upper = np.triu_indices(n, 1)
    assert np.all(grid.R[upper] == 0.0)
    assert np.all(np.diagonal(grid.C) == 1.0)
    assert np.all(np.diagonal(grid.R) == 1.0)
    np.testing.assert_array_equal(grid.C, grid.C.T)
    assert np.abs(grid.C).max() <= 1 + 1e-6


def test_pure_loss_from_multiplier(small_run):
    grid, tr = small_run
    np.testing.assert_allclose(tr["loss"], -(tr["z"] - 1.0 * 0.5) / 3, rtol=1e-14)
    assert np.all(np.isnan(tr["loss2"]))
    assert len(tr) == grid.n
    np.testing.assert_array_equal(tr["z"], grid.z)


def test_loss_from_z_examples():
    pot = Potential.pure(3)
    assert loss_from_z(0.7, 0.7, 1.0, pot)[0] == 0.0
    loss, l2, lp = loss_from_z(2.0, 0.5, 1.0, pot)
    assert loss == lp == pytest.approx(-0.5)
    assert math.isnan(l2)
    spk = Potential.spiked(3, 0.2, 6.0)
    loss, l2, lp = loss_from_z(1.5, 0.5, 1.0, spk, (0.4, 0.6))
    assert (l2, lp) == (pytest.approx(-0.2), pytest.approx(-0.2))
    with pytest.raises(IntegrationError):
        loss_from_z(1.5, 0.5, 1.0, spk, (0.4, 0.7))
    with pytest.raises(ValueError):
        loss_from_z(1.5, 0.5, 1.0, spk)


def test_smt_channel_split_adds_up():
    cfg = ChsckConfig(Potential.spiked(3, 0.2, 6.0), T=1.0, schedule=Schedule.constant(1.0),
                      dt=0.02, n_steps=400, record_stride=5)
    grid, tr = integrate(cfg)
    lhs = -2 * tr["loss2"] - 3 * tr["lossp"]
    np.testing.assert_allclose(lhs, tr["z"] - tr["eta"], atol=1e-6)
    np.testing.assert_allclose(tr["loss"], tr["loss2"] + tr["lossp"], rtol=1e-14)
    assert np.all(tr["m"] >= 0)


def test_zero_temperature_descends_towards_threshold():
    _, tr = integrate(_pure(T=0.0, eta=1.0, dt=0.02, n_steps=1000, record_stride=10))
    loss = tr["loss"]
    np.testing.assert_allclose(loss, -tr["z"] / 3, rtol=1e-14)
    assert np.all(np.diff(loss) < 0)
    assert loss[-1] > threshold_loss(3)


def test_clock_invariance():
    # (eta, T) on a grid dt is the unit-rate process at temperature eta T on a grid eta dt
    _, a = integrate(_pure(T=1.0, eta=0.5, dt=0.02, n_steps=400, record_stride=20))
    _, b = integrate(_pure(T=0.5, eta=1.0, dt=0.01, n_steps=400, record_stride=20))
    np.testing.assert_allclose(a["loss"], b["loss"], rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(a["z"], b["z"], rtol=1e-12)


def test_fluctuation_dissipation_at_high_temperature():
    dt = 0.02
    grid, _ = integrate(_pure(T=1.0, eta=1.0, dt=dt, n_steps=1000, record_stride=100))
    i0 = 700
    for k in range(1, 21):
        r = grid.R[i0 + k, i0]
        dc = -(grid.C[i0 + k + 1, i0] - grid.C[i0 + k - 1, i0]) / (2 * dt)
        assert r == pytest.approx(dc / 1.0, rel=0.10)


def test_grid_refinement_is_first_order():
    vals = []
    for dt in (0.04, 0.02, 0.01):
        n = int(round(2.0 / dt))
        _, tr = integrate(_pure(dt=dt, n_steps=n, record_stride=n))
        assert tr.t[-1] == pytest.approx(2.0)
        vals.append(tr.last("loss"))
    d1, d2 = abs(vals[0] - vals[1]), abs(vals[1] - vals[2])
    # first order: halving dt halves the change
    assert d1 <= 3 * (2 * d2)
    assert d2 <= 3 * (d1 / 2)


def test_instability_is_reported():
    with pytest.raises(IntegrationError) as err:
        integrate(_pure(T=1.0, eta=1.0, dt=3.0, n_steps=50))
    assert err.value.index >= 1


def test_grid_roundtrip(tmp_path, small_run):
    grid, _ = small_run
    path = tmp_path / "g.bin"
    grid.write(path)
    n = grid.n
    assert path.stat().st_size == 32 + 2 * 8 * n * (n + 1) // 2
    assert path.read_bytes()[:8] == b"CHSCKGRD"
    dt, c, r = TwoTimeGrid.read(path)
    assert dt == grid.dt
    np.testing.assert_array_equal(c, grid.C)
    np.testing.assert_array_equal(r, grid.R)
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"x" * 64)
    with pytest.raises(ValueError):
        TwoTimeGrid.read(bad)


def test_threshold_loss_values():
    assert threshold_loss(3) == pytest.approx(-0.94281, abs=1e-5)
    assert threshold_loss(2) == -1.0
    assert threshold_loss(6) == pytest.approx(-0.74536, abs=1e-5)


def test_threshold_loss_linear_in_temperature():
    assert threshold_loss_at_temperature(3, 0.0) == threshold_loss(3)
    assert threshold_loss_at_temperature(2, 0.7) == -1.0
    assert threshold_loss_at_temperature(3, 0.1) == pytest.approx(-0.90948, abs=1e-5)


def test_dynamical_temperature():
    assert dynamical_temperature(3) == pytest.approx(0.5, rel=1e-15)
    q = 4 / 5
    assert dynamical_temperature(6) == pytest.approx(math.sqrt(q ** 4 / 5), rel=1e-15)


@pytest.mark.parametrize("p", [3, 4, 5, 6, 8])
def test_threshold_meets_paramagnet_at_dynamical_temperature(p):
    td = dynamical_temperature(p)
    assert threshold_overlap(p, td) == pytest.approx((p - 2) / (p - 1), abs=1e-7)
    assert threshold_loss_exact(p, td) == pytest.approx(paramagnetic_loss(p, td), abs=1e-12)
    assert threshold_loss_exact(p, 0.0) == threshold_loss(p)
    assert threshold_loss_exact(p, 1e-8) == pytest.approx(threshold_loss(p), abs=1e-7)
    with pytest.raises(ValueError):
        threshold_overlap(p, 1.01 * td)


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 8), st.floats(0.01, 0.99))
def test_threshold_overlap_solves_marginality(p, frac):
    T = frac * dynamical_temperature(p)
    q = threshold_overlap(p, T)
    assert (p - 2) / (p - 1) <= q < 1
    assert (p - 1) * q ** (p - 2) * (1 - q) ** 2 == pytest.approx(T * T, rel=1e-9)
    assert threshold_loss_exact(p, T) == pytest.approx(channel_threshold_loss(p, 1.0, q, T))


def test_paramagnetic_loss():
    assert paramagnetic_loss(3, 0.5) == pytest.approx(-2 / 3)
    assert paramagnetic_loss(6, 0.5) == pytest.approx(-1 / 3)
    with pytest.raises(ValueError):
        paramagnetic_loss(3, 0.0)


def test_paramagnetic_run_reaches_equilibrium_loss():
    # unit rate, T = 1 > T_d: loss -> -1/(p T); the Euler bias is O(dt), so extrapolate
    out = []
    for dt in (0.04, 0.02):
        n = int(round(20 / dt))
        _, tr = integrate(_pure(p=3, T=1.0, eta=1.0, dt=dt, n_steps=n, record_stride=n))
        out.append(tr.last("loss"))
    assert out[1] == pytest.approx(paramagnetic_loss(3, 1.0), abs=1e-2)
    assert 2 * out[1] - out[0] == pytest.approx(paramagnetic_loss(3, 1.0), abs=2e-4)


def test_optimal_beta():
    assert optimal_beta(2 / 3) == pytest.approx(0.4, rel=1e-15)
    assert optimal_beta(1.0) == 0.5
    assert optimal_beta(0.0) == 0.0
    with pytest.raises(ValueError):
        optimal_beta(-1.0)
