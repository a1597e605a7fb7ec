"""Catalog of delay functionals ``eta: C([-h, 0]; R^5) -> [0, h]``.

Every evaluator receives a *history segment*: a callable ``segment(theta)``
returning the five-component state at ``t + theta`` for ``theta`` in
``[-h, 0]``, exposing the maximal delay as ``segment.h``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import kernels
from .errors import DelayRangeError, DomainError, UnsupportedFamilyError


@dataclass(frozen=True)
class Constant:
    h0: float

    def validate(self, h: float) -> None:
        if not (0.0 < self.h0 <= h):
            raise DomainError(f"constant delay needs 0 < h0 <= h, got h0={self.h0}, h={h}")


@dataclass(frozen=True)
class PointwiseQuadratic:
    """``clamp(h0 + a1 (T - centerT)^2 + a2 (V - centerV)^2, etamin, h)``."""

    h0: float
    a1: float
    a2: float
    centerT: float
    centerV: float
    etamin: float

    def validate(self, h: float) -> None:
        if not (0.0 < self.etamin <= self.h0 <= h):
            raise DomainError(
                f"pointwise delay needs 0 < etamin <= h0 <= h, got "
                f"etamin={self.etamin}, h0={self.h0}, h={h}")
        if self.a1 < 0.0 or self.a2 < 0.0:
            raise DomainError("pointwise delay curvatures must be >= 0")


@dataclass(frozen=True)
class Reciprocal:
    """``hmin + (hmax - hmin) / (1 + cv V(t))``; shrinks as the viral load grows."""

    hmin: float
    hmax: float
    cv: float

    def validate(self, h: float) -> None:
        if not (0.0 < self.hmin <= self.hmax <= h):
            raise DomainError(
                f"reciprocal delay needs 0 < hmin <= hmax <= h, got "
                f"hmin={self.hmin}, hmax={self.hmax}, h={h}")
        if self.cv < 0.0:
            raise DomainError("reciprocal delay needs cv >= 0")


@dataclass(frozen=True)
class Custom:
    """User evaluator ``evaluator(segment) -> tau``.

    The evaluator must be a pure function of the segment. Its output is
    clamped to ``[0, h]``; a non-finite value, or one outside ``[0, h]``
    beyond ``range_tol``, raises :class:`DelayRangeError`.
    """

    evaluator: Callable
    range_tol: float = 1e-12

    def validate(self, h: float) -> None:
        if not callable(self.evaluator):
            raise DomainError("custom delay evaluator must be callable")


DelaySpec = Union[Constant, PointwiseQuadratic, Reciprocal, Custom]
CATALOG = (Constant, PointwiseQuadratic, Reciprocal)


def _custom_value(spec: Custom, segment, h: float) -> float:
    tau = float(spec.evaluator(segment))
    if not math.isfinite(tau) or tau < -spec.range_tol or tau > h + spec.range_tol:
        raise DelayRangeError(f"custom delay returned {tau!r}, outside [0, {h}]")
    return min(max(tau, 0.0), h)


def eval_delay(spec: DelaySpec, segment) -> float:
    """Delay value on a history segment."""
    h = float(segment.h)
    if isinstance(spec, Custom):
        return _custom_value(spec, segment, h)
    now = np.asarray(segment(0.0), dtype=float)
    return float(delay_of_states(spec, now[None, :], h)[0])


def delay_of_states(spec: DelaySpec, states: np.ndarray, h: float) -> np.ndarray:
    """Vectorised delay for the pointwise catalog families (rows of ``states``)."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    T = states[:, 0]
    V = states[:, 2]
    if isinstance(spec, Constant):
        return np.full(states.shape[0], float(spec.h0))
    if isinstance(spec, PointwiseQuadratic):
        raw = spec.h0 + spec.a1 * (T - spec.centerT) ** 2 + spec.a2 * (V - spec.centerV) ** 2
        return np.clip(raw, spec.etamin, h)
    if isinstance(spec, Reciprocal):
        return spec.hmin + (spec.hmax - spec.hmin) / (1.0 + spec.cv * np.maximum(V, 0.0))
    raise UnsupportedFamilyError(f"{type(spec).__name__} is not a pointwise catalog family")


def kernel_params(spec: DelaySpec) -> np.ndarray:
    """Encode a catalog family for :func:`virsdd.kernels.catalog_tau`."""
    if isinstance(spec, Constant):
        return np.array([kernels.FAMILY_CONSTANT, spec.h0], dtype=float)
    if isinstance(spec, PointwiseQuadratic):
        return np.array([kernels.FAMILY_POINTWISE_QUADRATIC, spec.h0, spec.a1, spec.a2,
                         spec.centerT, spec.centerV, spec.etamin], dtype=float)
    if isinstance(spec, Reciprocal):
        return np.array([kernels.FAMILY_RECIPROCAL, spec.hmin, spec.hmax, spec.cv], dtype=float)
    raise UnsupportedFamilyError(f"{type(spec).__name__} has no kernel encoding")


def c_eta_bound(spec: DelaySpec) -> float:
    """Constant ``c`` with ``|eta(phi) - eta(phi_hat)| <= c ((T - T_hat)^2 + (V - V_hat)^2)``.

    Valid when the family is centred at the equilibrium; clamping to
    ``[etamin, h]`` is 1-Lipschitz and ``h0`` lies inside that interval.
    """
    if not isinstance(spec, PointwiseQuadratic):
        raise UnsupportedFamilyError("c_eta is defined for the pointwise quadratic family only")
    return max(spec.a1, spec.a2)


class _SampledSegment:
    def __init__(self, thetas, values, h):
        self.thetas = thetas
        self.values = values
        self.h = h

    def __call__(self, theta):
        return np.array([np.interp(theta, self.thetas, self.values[:, i]) for i in range(5)])


def check_H1(spec: DelaySpec, samples: int = 100, *, h: float = 1.0, seed: int = 0,
             scale: float = 100.0) -> bool:
    """Positivity of the delay on histories with ``T*(t) = V(t) = 0``.

    Catalog families are decided analytically. A :class:`Custom` delay is
    evaluated on ``samples`` random non-negative piecewise-linear segments;
    this is a sampling check, never a proof.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if isinstance(spec, Constant):
        return spec.h0 > 0.0
    if isinstance(spec, PointwiseQuadratic):
        return spec.etamin > 0.0
    if isinstance(spec, Reciprocal):
        return spec.hmin > 0.0
    rng = np.random.default_rng(seed)
    thetas = np.linspace(-h, 0.0, 9)
    for _ in range(samples):
        values = rng.uniform(0.0, scale, size=(thetas.size, 5))
        values[-1, 1] = 0.0
        values[-1, 2] = 0.0
        try:
            tau = _custom_value(spec, _SampledSegment(thetas, values, h), h)
        except DelayRangeError:
            return False
        if tau <= 0.0:
            return False
    return True
