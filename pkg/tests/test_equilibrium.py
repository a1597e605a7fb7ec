import math

import numpy as np
import pytest

import virsdd as v
from virsdd.equilibrium import h2_sides, h3_sides, quadratic_coefficients, stationary_residual
from virsdd.invariants import omega_c_bounds


def test_h2_examples(P0):
    assert v.check_H2(P0)
    s = h2_sides(P0)
    assert (s.lhs, s.rhs) == (pytest.approx(0.25), pytest.approx(0.06))
    assert not v.check_H2(P0.replace(b=1.0))
    # exact boundary: N delta gamma g == beta c b
    assert not v.check_H2(P0.replace(N=1.0, delta=1.0, gamma=1.0, g=1.0, beta=1.0, c=1.0, b=1.0))


def test_quadratic_root(P0):
    a, b, c = quadratic_coefficients(P0)
    assert (a, b, c) == (pytest.approx(0.0005), pytest.approx(0.0505), pytest.approx(-5.05))
    T = v.solve_That(P0)
    lo, hi = 0.0, 10 * P0.lam / P0.d
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if a * mid * mid + b * mid + c < 0 else (lo, mid)
    assert T == pytest.approx(lo, abs=1e-10)
    assert T == pytest.approx(61.97333017209012, rel=1e-13)


def test_linear_case():
    P = v.P0.replace(k1=0.0, g=1.0, k2=0.0, b=1.0, lam=1.0, d=1.0, k=1.0)
    assert v.solve_That(P) == pytest.approx(0.5, rel=1e-15)


def test_discriminant_positive():
    rng = np.random.default_rng(7)
    for _ in range(10000):
        P = v.ModelParams(*rng.uniform(0.01, 10.0, 16))
        a, b, c = quadratic_coefficients(P)
        assert b * b - 4 * a * c > 0.0


def test_h3(P0):
    assert v.check_H3(P0, v.solve_That(P0))
    s = h3_sides(P0, v.solve_That(P0))
    assert s.rhs == pytest.approx(6.1973 + 0.25 * math.exp(0.1), abs=1e-3)
    # lambda = 6: T_hat drops to about 34.5 and H3 still holds once recomputed
    P6 = P0.replace(lam=6.0)
    s6 = h3_sides(P6, v.solve_That(P6))
    assert s6.holds and s6.rhs == pytest.approx(3.7288, abs=1e-4)
    P2 = P0.replace(lam=0.5)
    assert not v.check_H3(P2, v.solve_That(P2))
    Pw = P0.replace(omega=50.0)
    assert not v.check_H3(Pw, v.solve_That(Pw))


def test_equilibrium_p0(P0):
    eq = v.equilibrium(P0)
    assert eq.Tstarhat == pytest.approx(0.5)
    assert eq.Vhat == pytest.approx(0.2)
    assert eq.Ahat == pytest.approx(9.5)
    assert eq.Yhat == pytest.approx(6.38159074871838, rel=1e-12)
    assert P0.N * P0.delta * eq.Tstarhat == pytest.approx(eq.Vhat * (P0.c + P0.q * eq.Ahat))
    assert stationary_residual(eq.as_array(), P0) < 1e-9
    b = omega_c_bounds(P0)
    assert np.all(np.array([eq.That, eq.Tstarhat, eq.Vhat, eq.Tstarhat + b.p_over_beta * eq.Yhat,
                            eq.Vhat + b.q_over_g * eq.Ahat]) < b.upper())


def test_hypothesis_errors(P0):
    with pytest.raises(v.HypothesisError) as exc:
        v.equilibrium(P0.replace(b=1.0))
    assert exc.value.name == "H2" and exc.value.lhs == pytest.approx(0.25) and exc.value.rhs == pytest.approx(0.6)
    with pytest.raises(v.HypothesisError) as exc:
        v.equilibrium(P0.replace(lam=0.5))
    assert exc.value.name == "H3"


def test_random_draws():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 1000:
        P = v.P0.replace(**{k: float(getattr(v.P0, k) * rng.uniform(0.5, 2.0))
                            for k in ("lam", "d", "k", "k1", "k2", "delta", "p", "N", "c", "q",
                                      "beta", "gamma", "g", "b", "omega", "h")})
        if not v.check_H2(P) or not v.check_H3(P, v.solve_That(P)):
            continue
        eq = v.equilibrium(P)
        assert np.all(eq.as_array() > 0.0)
        assert stationary_residual(eq.as_array(), P) < 1e-9
        checked += 1
