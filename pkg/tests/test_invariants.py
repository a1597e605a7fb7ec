import math

import numpy as np
import pytest

import virsdd as v
from virsdd.history import ConstantHistory, PiecewiseLinearHistory
from virsdd.invariants import (absorbing_time, combo_validity_margin, envelope_entry_time, gronwall_check,
                               gronwall_envelope, in_omega_c, omega_c_bounds, oracle_integral_representation,
                               sample_initial_in_omega_c, scaled_bounds_state)


def test_bounds_p0(P0):
    b = omega_c_bounds(P0)
    assert b.Tmax == pytest.approx(100.0)
    assert b.Tstarmax == pytest.approx(2000 * math.exp(-0.1), rel=1e-14)
    assert b.Tstarmax == pytest.approx(1809.67, abs=5e-3)
    assert b.Vmax == pytest.approx(10 * 0.5 * 10 * math.exp(-0.1) / (3 * 0.1 * 0.05), rel=1e-14)
    assert np.all(b.upper() > 0.0)
    assert (b.p_over_beta, b.q_over_g) == (pytest.approx(5.0), pytest.approx(2.0))
    assert combo_validity_margin(P0) >= 1.0


def test_bounds_omega_zero_and_k2_zero(P0):
    b0 = omega_c_bounds(P0.replace(omega=1e-300))
    assert b0.Tstarmax == pytest.approx(P0.k * P0.lam / (P0.d * P0.k2 * P0.delta), rel=1e-14)
    with pytest.raises(v.UnsupportedFamilyError):
        omega_c_bounds(P0.replace(k2=0.0))


def test_membership_examples(P0):
    b = omega_c_bounds(P0)
    assert in_omega_c(ConstantHistory(np.zeros(5)), b)
    rep = in_omega_c(ConstantHistory([P0.lam / P0.d + 1, 0, 0, 0, 0]), b)
    assert not rep and rep.coordinate == "T" and rep.margin == pytest.approx(1.0)
    rep = in_omega_c(np.array([[1, 1, 1, 1, 1], [1, -0.5, 1, 1, 1]], dtype=float), b)
    assert not rep and rep.coordinate == "Tstar>=0" and rep.t == 1.0
    y = np.zeros((1, 5))
    y[0, 3] = b.comboTY / b.p_over_beta * 1.01
    assert in_omega_c((np.array([3.0]), y), b).coordinate == "TY"
    assert not in_omega_c(y, b)
    assert in_omega_c(y, b.widened(b.comboTY))


def test_sampler(P0):
    b = omega_c_bounds(P0)
    a = sample_initial_in_omega_c(P0, b, 5)
    c = sample_initial_in_omega_c(P0, b, 5)
    assert np.array_equal(a.values, c.values)
    for seed in range(100):
        phi = sample_initial_in_omega_c(P0, b, seed, lipschitz_cap=10.0)
        assert in_omega_c(phi, b)
        slopes = np.abs(np.diff(phi.values[:, :3], axis=0)) / np.diff(phi.thetas)[:, None]
        assert slopes.max() <= 10.0 + 1e-9
    flat = sample_initial_in_omega_c(P0, b, 1, lipschitz_cap=0.0)
    assert np.all(flat.values == flat.values[0])


def test_run_stays_inside(P0, eq0, pq_delay):
    b = omega_c_bounds(P0)
    phi = sample_initial_in_omega_c(P0, b, 42)
    tr = v.integrate(P0, pq_delay, phi, v.SimConfig(t_end=200.0))
    assert in_omega_c(tr, b, 1e-8)
    assert tr.y.min() >= -1e-12
    assert gronwall_check(tr.t, tr.y[:, 0], P0.lam, P0.d)


def test_gronwall_trivial():
    t = np.linspace(0, 5, 11)
    assert gronwall_check(t, np.full(11, 2.0), 4.0, 2.0)
    assert not gronwall_check(t, np.full(11, 3.0), 4.0, 2.0)
    env = gronwall_envelope(t, 5.0, 4.0, 2.0)
    assert env[0] == 5.0 and env[-1] == pytest.approx(2.0 + 3.0 * math.exp(-10.0), rel=1e-14)
    with pytest.raises(v.DomainError):
        gronwall_check(t, t, 1.0, 0.0)


def test_absorbing(P0, eq0):
    b = omega_c_bounds(P0)
    tr = v.integrate(P0, v.Constant(1.0), eq0.as_array(), v.SimConfig(t_end=2.0))
    assert absorbing_time(tr, b, 1e-3) == 0.0
    assert absorbing_time(tr, b, math.inf) == 0.0
    phi = np.array([2 * P0.lam / P0.d, eq0.Tstarhat, eq0.Vhat, eq0.Yhat, eq0.Ahat])
    pred = envelope_entry_time(P0, ConstantHistory(phi), b, 1e-3)
    tr = v.integrate(P0, v.Constant(1.0), phi, v.SimConfig(t_end=pred.time + 5.0))
    ta = absorbing_time(tr, b, 1e-3)
    assert ta is not None and 0.0 < ta <= pred.time
    short = v.integrate(P0, v.Constant(1.0), phi, v.SimConfig(t_end=1.0))
    assert absorbing_time(short, b, 1e-3) is None


def test_envelope_from_scaled_state(P0):
    b = omega_c_bounds(P0)
    phi = PiecewiseLinearHistory([-1.0, 0.0], np.array([scaled_bounds_state(b, 2.0)] * 2))
    pred = envelope_entry_time(P0, phi, b, 1e-3)
    assert set(pred.per_condition) == {"T", "Tstar", "V", "TY", "VA"}
    assert pred.time == max(pred.per_condition.values()) > 0.0


def test_oracle(P0, eq0, pq_delay):
    tr = v.integrate(P0, pq_delay, eq0.as_array(), v.SimConfig(dt=1e-2, t_end=5.0))
    assert oracle_integral_representation(tr, P0, pq_delay) < 1e-9
    tr = v.integrate(P0, pq_delay, eq0.as_array() * 1.01, v.SimConfig(dt=1e-3, t_end=20.0))
    assert oracle_integral_representation(tr, P0, pq_delay) < 1e-4
    custom = v.Custom(lambda seg: min(max(0.5 + 0.01 * ((seg(0.0)[0] - eq0.That) ** 2
                                                        + (seg(0.0)[2] - eq0.Vhat) ** 2), 0.05), 1.0))
    tr = v.integrate(P0, custom, eq0.as_array() * 1.01, v.SimConfig(dt=1e-2, t_end=3.0))
    assert oracle_integral_representation(tr, P0, custom, checkpoints=3, panels=64) < 1e-4
    with pytest.raises(v.DomainError):
        oracle_integral_representation(tr, P0, pq_delay, panels=3)
