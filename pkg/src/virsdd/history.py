"""Dense-output storage of a delay-equation solution.

A :class:`Trajectory` keeps every knot ``(t_i, y_i, dy_i)`` of a run and
evaluates the piecewise-cubic Hermite interpolant between them. Times before
the first knot fall on the initial function, which is held as its own
Hermite table (exact for constant and piecewise-linear data).
"""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from . import kernels
from ._jit import USE_NUMBA
from .errors import DomainError, OutOfDomainError
from .model import STATE_NAMES, StatePoint

CSV_HEADER = "t," + ",".join(STATE_NAMES)


class InitialFunction:
    """Initial history ``phi`` on ``[-h, 0]``."""

    def __call__(self, theta):
        raise NotImplementedError

    def table(self, h: float, t0: float = 0.0):
        raise NotImplementedError

    def lipschitz_estimate(self, h: float) -> np.ndarray:
        """Per-component max slope of the stored representation."""
        pt, py, pdl, pdr = self.table(h)
        if pt.size < 2:
            return np.zeros(5)
        return np.maximum(np.abs(pdl).max(axis=0), np.abs(pdr).max(axis=0))


class ConstantHistory(InitialFunction):
    def __init__(self, values):
        self.values = np.asarray(values, dtype=float).copy()
        if self.values.shape != (5,):
            raise DomainError("constant history needs five values")
        self.values.setflags(write=False)

    def __call__(self, theta):
        return self.values.copy()

    def table(self, h, t0=0.0):
        pt = np.array([t0 - h, t0])
        py = np.vstack([self.values, self.values])
        z = np.zeros((1, 5))
        return pt, py, z, z.copy()

    def __repr__(self):
        return f"ConstantHistory({self.values.tolist()})"


class PiecewiseLinearHistory(InitialFunction):
    """Linear interpolation through ``(thetas[i], values[i])``; ``thetas`` run from ``-h`` to 0."""

    def __init__(self, thetas, values):
        self.thetas = np.asarray(thetas, dtype=float).copy()
        self.values = np.asarray(values, dtype=float).copy()
        if self.values.shape != (self.thetas.size, 5) or self.thetas.size < 2:
            raise DomainError("piecewise-linear history needs matching (m,) thetas and (m, 5) values, m >= 2")
        if np.any(np.diff(self.thetas) <= 0.0) or self.thetas[-1] != 0.0:
            raise DomainError("history thetas must increase strictly and end at 0")
        self.thetas.setflags(write=False)
        self.values.setflags(write=False)

    def __call__(self, theta):
        return np.array([np.interp(theta, self.thetas, self.values[:, i]) for i in range(5)])

    def table(self, h, t0=0.0):
        if not np.isclose(self.thetas[0], -h, rtol=0.0, atol=1e-12 * max(1.0, h)):
            raise DomainError(f"history starts at {self.thetas[0]}, expected {-h}")
        slopes = np.diff(self.values, axis=0) / np.diff(self.thetas)[:, None]
        return t0 + self.thetas, self.values.copy(), slopes, slopes.copy()


class CallableHistory(InitialFunction):
    """Arbitrary callable ``fn(theta) -> 5 values``, sampled onto a Hermite table."""

    def __init__(self, fn, derivative=None, intervals: int = 512):
        self.fn = fn
        self.derivative = derivative
        self.intervals = int(intervals)

    def __call__(self, theta):
        return np.asarray(self.fn(theta), dtype=float)

    def _slope(self, theta, h):
        if self.derivative is not None:
            return np.asarray(self.derivative(theta), dtype=float)
        eps = 1e-6 * h
        lo = max(theta - eps, -h)
        hi = min(theta + eps, 0.0)
        return (self(hi) - self(lo)) / (hi - lo)

    def table(self, h, t0=0.0):
        thetas = np.linspace(-h, 0.0, self.intervals + 1)
        py = np.array([self(th) for th in thetas])
        slopes = np.array([self._slope(th, h) for th in thetas])
        return t0 + thetas, py, slopes[:-1].copy(), slopes[1:].copy()


def as_initial(phi) -> InitialFunction:
    if isinstance(phi, InitialFunction):
        return phi
    if callable(phi):
        return CallableHistory(phi)
    return ConstantHistory(phi)


class HistorySegment:
    """Accessor ``theta -> u(t + theta)`` on ``[-h, 0]``."""

    def __init__(self, source, t: float, h: float):
        self._source = source
        self.t = float(t)
        self.h = float(h)

    def __call__(self, theta):
        theta = float(theta)
        if theta > 0.0 or theta < -self.h * (1.0 + 1e-12) - 1e-15:
            raise OutOfDomainError(f"theta={theta} outside [-{self.h}, 0]")
        return self._source(self.t + theta)

    @property
    def now(self) -> np.ndarray:
        return self(0.0)


def initial_segment(phi, h: float) -> HistorySegment:
    """Segment view of an initial function alone (``t = 0``)."""
    phi = as_initial(phi)
    pt, py, pdl, pdr = phi.table(h)
    tk = np.array([0.0])
    yk = py[-1:].copy()

    def source(s):
        return _eval_many(np.array([s]), tk, yk, yk, 0, pt, py, pdl, pdr)[0]

    return HistorySegment(source, 0.0, h)


def _eval_many(s, tk, yk, dyk, n_last, pt, py, pdl, pdr):
    if USE_NUMBA:
        return kernels.history_many(s, tk, yk, dyk, n_last, pt, py, pdl, pdr)
    return kernels.history_many_numpy(s, tk, yk, dyk, n_last, pt, py, pdl, pdr)


class Trajectory:
    """Knots of a run plus the initial function, with Hermite dense output.

    Arrays are read-only; a trajectory is safe to share between readers.
    """

    def __init__(self, t, y, dy, initial, h: float, *, params=None, delay=None):
        self.t = np.ascontiguousarray(t, dtype=float)
        self.y = np.ascontiguousarray(y, dtype=float)
        self.dy = np.ascontiguousarray(dy, dtype=float)
        if self.t.ndim != 1 or self.y.shape != (self.t.size, 5) or self.dy.shape != self.y.shape:
            raise DomainError("knot arrays must have shapes (n,), (n, 5), (n, 5)")
        if self.t.size == 0:
            raise DomainError("a trajectory needs at least the initial knot")
        if np.any(np.diff(self.t) <= 0.0):
            raise DomainError("knot times must increase strictly")
        for a in (self.t, self.y, self.dy):
            a.setflags(write=False)
        self.initial = as_initial(initial)
        self.h = float(h)
        self.params = params
        self.delay = delay
        self._table = self.initial.table(self.h, self.t0)

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def t_last(self) -> float:
        return float(self.t[-1])

    @property
    def n_knots(self) -> int:
        return self.t.size

    def _check(self, s):
        lo = self.t0 - self.h
        tol = 1e-12 * max(1.0, abs(lo), abs(self.t_last))
        bad = (s < lo - tol) | (s > self.t_last + tol)
        if np.any(bad):
            first = np.asarray(s)[bad].flat[0]
            raise OutOfDomainError(f"t={first!r} outside [{lo}, {self.t_last}]")

    def eval_many(self, times) -> np.ndarray:
        """States at an array of times, shape ``(m, 5)``."""
        s = np.ascontiguousarray(np.atleast_1d(np.asarray(times, dtype=float)))
        self._check(s)
        s = np.clip(s, self.t0 - self.h, self.t_last)
        pt, py, pdl, pdr = self._table
        return _eval_many(s, self.t, self.y, self.dy, self.t.size - 1, pt, py, pdl, pdr)

    def eval(self, t: float) -> StatePoint:
        return StatePoint(*self.eval_many([t])[0])

    def segment_at(self, t: float) -> HistorySegment:
        t = float(t)
        if t < self.t0 or t > self.t_last:
            self._check(np.array([t]))
            if t < self.t0:
                raise OutOfDomainError(f"segment time {t} before t0={self.t0}")
        return HistorySegment(lambda s: self.eval_many([s])[0], t, self.h)

    def knot_index(self, t: float, tol: float = 1e-9) -> int | None:
        i = int(np.searchsorted(self.t, t))
        for j in (i - 1, i):
            if 0 <= j < self.t.size and abs(self.t[j] - t) <= tol * max(1.0, abs(t)):
                return j
        return None


def write_csv(traj: Trajectory | None, target, stride: int = 1) -> None:
    """Write ``t,T,Tstar,V,Y,A`` rows, every ``stride``-th knot, 17 significant digits.

    ``traj=None`` writes the header only.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    if traj is not None:
        for i in range(0, traj.n_knots, stride):
            row = (traj.t[i],) + tuple(traj.y[i])
            buf.write(",".join(format(float(v), ".17g") for v in row) + "\n")
    text = buf.getvalue()
    if hasattr(target, "write"):
        target.write(text)
    else:
        Path(target).write_text(text, encoding="utf-8")


def read_csv(source) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`write_csv` for values: ``(t, states)``."""
    data = np.loadtxt(source, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        return np.empty(0), np.empty((0, 5))
    return data[:, 0], data[:, 1:]
