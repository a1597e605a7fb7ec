"""Interior equilibrium with both immune responses active."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, HypothesisError
from .model import ModelParams, StatePoint, response_f, rhs

RESIDUAL_TOL = 1e-9


class Inequality(NamedTuple):
    """Outcome of a strict inequality ``lhs > rhs``."""

    holds: bool
    lhs: float
    rhs: float

    def __bool__(self):
        return self.holds


def h2_sides(params: ModelParams) -> Inequality:
    lhs = params.N * params.delta * params.gamma * params.g
    rhs_ = params.beta * params.c * params.b
    return Inequality(lhs > rhs_, lhs, rhs_)


def check_H2(params: ModelParams) -> bool:
    """``N delta gamma g > beta c b`` (positive antibody level)."""
    return h2_sides(params).holds


def quadratic_coefficients(params: ModelParams) -> tuple[float, float, float]:
    """Coefficients ``(a, b, c)`` of ``a T^2 + b T + c = 0`` for the uninfected-cell level."""
    P = params
    a = P.d * P.g * P.k1
    b = P.d * P.k2 * P.b + P.d * P.g - P.lam * P.g * P.k1 + P.k * P.b
    c = -P.lam * (P.g + P.k2 * P.b)
    return a, b, c


def solve_That(params: ModelParams) -> float:
    """Positive root of the stationary quadratic (linear when ``k1 = 0``)."""
    a, b, c = quadratic_coefficients(params)
    if a == 0.0:
        if b <= 0.0:
            raise DomainError("degenerate stationary equation has no positive root")
        return -c / b
    # larger-magnitude root first, the other from the product c/a
    sq = math.sqrt(b * b - 4.0 * a * c)
    qq = -0.5 * (b + math.copysign(sq, b))
    r1, r2 = qq / a, c / qq
    T = r1 if r1 > 0.0 else r2
    # Newton polish
    T -= (a * T * T + b * T + c) / (2.0 * a * T + b)
    return T


def h3_sides(params: ModelParams, That: float) -> Inequality:
    lhs = params.lam
    rhs_ = params.d * That + params.delta * params.gamma / params.beta * math.exp(params.omega * params.h)
    return Inequality(lhs > rhs_, lhs, rhs_)


def check_H3(params: ModelParams, That: float) -> bool:
    """``lambda > d T_hat + delta gamma / beta * exp(omega h)`` (positive CTL level)."""
    return h3_sides(params, That).holds


@dataclass(frozen=True)
class Equilibrium:
    That: float
    Tstarhat: float
    Vhat: float
    Yhat: float
    Ahat: float
    residual: float = 0.0

    def as_state(self) -> StatePoint:
        return StatePoint(self.That, self.Tstarhat, self.Vhat, self.Yhat, self.Ahat)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_state(), dtype=float)


def stationary_residual(state, params: ModelParams) -> float:
    y = np.asarray(state, dtype=float)
    return float(np.max(np.abs(rhs(y, y[0], y[2], params))))


def equilibrium(params: ModelParams) -> Equilibrium:
    """Interior stationary point.

    Raises :class:`HypothesisError` naming H2 or H3 with both sides of the
    failed inequality.
    """
    P = params
    h2 = h2_sides(P)
    if not h2:
        raise HypothesisError("H2", h2.lhs, h2.rhs)
    That = solve_That(P)
    h3 = h3_sides(P, That)
    if not h3:
        raise HypothesisError("H3", h3.lhs, h3.rhs)
    E = math.exp(P.omega * P.h)
    Ts = P.gamma / P.beta
    Vh = P.b / P.g
    Ah = (P.N * P.delta * P.gamma * P.g - P.beta * P.c * P.b) / (P.beta * P.q * P.b)
    Yh = (P.lam - P.d * That - E * P.delta * Ts) / (E * P.p * Ts)
    state = np.array([That, Ts, Vh, Yh, Ah])
    if np.any(state <= 0.0):
        raise DomainError(f"equilibrium has a non-positive coordinate: {state}")
    res = stationary_residual(state, P)
    scale = max(1.0, P.lam)
    consistency = max(
        abs(P.N * P.delta * Ts - Vh * (P.c + P.q * Ah)),
        abs(P.lam - P.d * That - response_f(That, Vh, P)),
    )
    if res >= RESIDUAL_TOL * scale or consistency >= RESIDUAL_TOL * scale:
        raise DomainError(f"equilibrium residual too large: {res:.3e} / {consistency:.3e}")
    return Equilibrium(That, Ts, Vh, Yh, Ah, res)
