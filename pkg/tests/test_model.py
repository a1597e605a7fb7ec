import math

import numpy as np
import pytest

import virsdd as v
from virsdd.model import response_partials, rhs_many


def test_response_examples():
    P = v.P0
    assert v.response_f(5.0, 0.0, P) == 0.0
    assert v.response_f(0.0, 7.0, P) == 0.0
    one = P.replace(k=1.0, k1=1.0, k2=1.0)
    assert v.response_f(1.0, 1.0, one) == pytest.approx(1.0 / 3.0, rel=1e-15)
    bil = P.replace(k1=0.0, k2=0.0)
    assert v.response_f(2.0, 3.0, bil) == pytest.approx(3.0, rel=1e-15)


def test_response_bounded_on_grid():
    P = v.P0
    V = np.linspace(0.0, 1e6, 20001)
    f = v.response_f(np.full_like(V, P.lam / P.d), V, P)
    assert np.all(f >= 0.0)
    assert f.max() <= P.k * P.lam / (P.d * P.k2)


def test_response_rejects_nonfinite():
    with pytest.raises(v.DomainError):
        v.response_f(np.nan, 1.0, v.P0)
    with pytest.raises(v.DomainError):
        v.rhs(np.array([1, 1, np.inf, 1, 1.0]), 1.0, 1.0, v.P0)


def test_partials_match_finite_difference():
    P = v.P0
    T, V, eps = 30.0, 40.0, 1e-6
    fT, fV = response_partials(T, V, P)
    assert fT == pytest.approx((v.response_f(T + eps, V, P) - v.response_f(T - eps, V, P)) / (2 * eps), rel=1e-7)
    assert fV == pytest.approx((v.response_f(T, V + eps, P) - v.response_f(T, V - eps, P)) / (2 * eps), rel=1e-7)


def test_rhs_special_states():
    P = v.P0
    free = np.array([P.lam / P.d, 0.0, 0.0, 0.0, 0.0])
    assert np.all(v.rhs(free, P.lam / P.d, 0.0, P) == 0.0)
    np.testing.assert_array_equal(v.rhs(np.zeros(5), 0.0, 0.0, P), [P.lam, 0, 0, 0, 0])
    u = v.equilibrium(P).as_array()
    assert np.max(np.abs(v.rhs(u, u[0], u[2], P))) < 1e-9


def test_bilinear_matches_hand_coded(rng):
    P = v.P0.replace(k1=0.0, k2=0.0)
    e = math.exp(-P.omega * P.h)
    for _ in range(1000):
        y = rng.uniform(0.0, 50.0, 5)
        Td, Vd = rng.uniform(0.0, 50.0, 2)
        T, Ts, V, Y, A = y
        hand = [P.lam - P.d * T - P.k * T * V,
                e * P.k * Td * Vd - P.delta * Ts - P.p * Y * Ts,
                P.N * P.delta * Ts - P.c * V - P.q * A * V,
                P.beta * Ts * Y - P.gamma * Y,
                P.g * A * V - P.b * A]
        np.testing.assert_allclose(v.rhs(y, Td, Vd, P), hand, rtol=1e-13, atol=1e-12)


def test_rhs_many_matches_rhs(rng):
    P = v.P0
    ys = rng.uniform(0.0, 100.0, (50, 5))
    Td, Vd = rng.uniform(0.0, 100.0, (2, 50))
    many = rhs_many(ys, Td, Vd, P)
    for i in range(50):
        np.testing.assert_allclose(many[i], v.rhs(ys[i], Td[i], Vd[i], P), rtol=1e-13, atol=1e-12)


def test_jacobian_bounded_on_box():
    P = v.P0
    upper = np.array([100.0, 1809.0, 3016.0, 1000.0, 1000.0])
    rng = np.random.default_rng(0)
    for _ in range(50):
        y = rng.uniform(0.0, 1.0, 5) * upper
        J = np.empty((5, 5))
        for j in range(5):
            e = np.zeros(5)
            e[j] = 1e-6 * max(1.0, y[j])
            J[:, j] = (v.rhs(y + e, y[0], y[2], P) - v.rhs(y - e, y[0], y[2], P)) / (2 * e[j])
        assert np.all(np.isfinite(J))


@pytest.mark.parametrize("field,value", [("lam", 0.0), ("d", -1.0), ("k", -0.1), ("h", np.nan)])
def test_params_validation(field, value):
    with pytest.raises(v.DomainError):
        v.P0.replace(**{field: value})


def test_params_k_zero_allowed():
    assert v.P0.replace(k=0.0).k == 0.0
    assert v.P0.survival == pytest.approx(math.exp(-0.1))
    assert v.StatePoint(*range(5)).as_array().tolist() == [0, 1, 2, 3, 4]
