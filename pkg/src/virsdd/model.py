"""Model parameters, state vector and the right-hand side of the delay system."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import DomainError

_POSITIVE = ("lam", "d", "delta", "p", "N", "c", "q", "beta", "gamma", "g", "b", "omega", "h")


@dataclass(frozen=True)
class ModelParams:
    """Rate constants of the five-compartment model plus the maximal delay ``h``.

    ``lam`` is the cell production rate (``lambda`` in configuration files).
    ``k = 0`` is accepted as the infection-free degenerate case.
    """

    lam: float = 10.0
    d: float = 0.1
    k: float = 0.5
    k1: float = 0.01
    k2: float = 0.05
    delta: float = 0.5
    p: float = 1.0
    N: float = 10.0
    c: float = 3.0
    q: float = 1.0
    beta: float = 0.2
    gamma: float = 0.1
    g: float = 0.5
    b: float = 0.1
    omega: float = 0.1
    h: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if not math.isfinite(val):
                raise DomainError(f"parameter {f.name} must be finite, got {val!r}")
        for name in _POSITIVE:
            if getattr(self, name) <= 0.0:
                raise DomainError(f"parameter {name} must be > 0, got {getattr(self, name)!r}")
        for name in ("k", "k1", "k2"):
            if getattr(self, name) < 0.0:
                raise DomainError(f"parameter {name} must be >= 0, got {getattr(self, name)!r}")

    def as_array(self) -> np.ndarray:
        """Flat vector in the layout expected by :mod:`virsdd.kernels`."""
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=float)

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def survival(self) -> float:
        """Fraction ``exp(-omega h)`` of infected cells surviving the eclipse phase."""
        return math.exp(-self.omega * self.h)


P0 = ModelParams()


class StatePoint(NamedTuple):
    T: float
    Tstar: float
    V: float
    Y: float
    A: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


STATE_NAMES = StatePoint._fields


def _finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise DomainError(f"non-finite input {v!r}")


def response_f(T, V, params: ModelParams):
    """Beddington-DeAngelis incidence ``k T V / (1 + k1 T + k2 V)``.

    Works elementwise on arrays.
    """
    _finite(T, V)
    T = np.asarray(T, dtype=float)
    V = np.asarray(V, dtype=float)
    out = params.k * T * V / (1.0 + params.k1 * T + params.k2 * V)
    return float(out) if out.ndim == 0 else out


def response_partials(T, V, params: ModelParams):
    """Closed-form ``(df/dT, df/dV)``."""
    T = np.asarray(T, dtype=float)
    V = np.asarray(V, dtype=float)
    den = 1.0 + params.k1 * T + params.k2 * V
    fT = params.k * V * (1.0 + params.k2 * V) / den**2
    fV = params.k * T * (1.0 + params.k1 * T) / den**2
    return fT, fV


def rhs(now, delayed_T: float, delayed_V: float, params: ModelParams) -> np.ndarray:
    """Time derivative of ``(T, T*, V, Y, A)`` given the delayed pair ``(T, V)``."""
    y = np.asarray(now, dtype=float)
    if y.shape != (5,):
        raise DomainError(f"state must have five components, got shape {y.shape}")
    _finite(y, delayed_T, delayed_V)
    out = np.empty(5)
    kernels.rhs_into(params.as_array(), y, float(delayed_T), float(delayed_V), out)
    return out


def rhs_many(states: np.ndarray, delayed_T, delayed_V, params: ModelParams) -> np.ndarray:
    """Vectorised :func:`rhs` over rows of ``states`` (no finiteness check)."""
    y = np.asarray(states, dtype=float)
    T, Ts, V, Y, A = y.T
    f_now = params.k * T * V / (1.0 + params.k1 * T + params.k2 * V)
    f_del = params.k * delayed_T * delayed_V / (1.0 + params.k1 * delayed_T + params.k2 * delayed_V)
    out = np.empty_like(y)
    out[:, 0] = params.lam - params.d * T - f_now
    out[:, 1] = params.survival * f_del - params.delta * Ts - params.p * Y * Ts
    out[:, 2] = params.N * params.delta * Ts - params.c * V - params.q * A * V
    out[:, 3] = params.beta * Ts * Y - params.gamma * Y
    out[:, 4] = params.g * A * V - params.b * A
    return out
