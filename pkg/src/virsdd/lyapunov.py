"""Lyapunov functionals along trajectories and their derivative decompositions.

Two functionals are provided. ``U1`` uses the delay window fixed at the
equilibrium value ``eta_hat``; ``Usdd`` uses the state-dependent window
``eta(u_t)``. For each one, ``dU/dt = -D + S`` holds along solutions, with
``D >= 0`` and ``S`` a sign-indefinite remainder produced by the state
dependence of the delay.

The V, Y and A summands carry their equilibrium value as a prefactor
(``V_hat v(V/V_hat)`` and so on). That scaling is what makes the derivative
identity exact.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .delay import Constant, Custom, DelaySpec, delay_of_states, eval_delay
from .equilibrium import Equilibrium
from .errors import DomainError
from .history import ConstantHistory, Trajectory, initial_segment
from .model import ModelParams


@dataclass(frozen=True)
class QuadratureConfig:
    """Composite Simpson panel count for the history integrals."""

    panels: int = 64

    def __post_init__(self):
        if int(self.panels) != self.panels or self.panels < 4 or self.panels % 2:
            raise DomainError(f"panels must be an even integer >= 4, got {self.panels!r}")


def v(x):
    """``x - 1 - ln x`` for ``x > 0`` (elementwise)."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0.0)):
        raise DomainError("v(x) requires x > 0")
    out = (x - 1.0) - np.log1p(x - 1.0)
    return float(out) if out.ndim == 0 else out


def v_quadratic_bounds(x, delta: float):
    """Quadratic envelopes of ``v`` on ``|x - 1| <= delta < 1``.

    Returns ``(lower, upper)`` with
    ``(x-1)^2 / (2(1+delta)) <= v(x) <= (x-1)^2 / (2(1-delta))``.
    """
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    sq = (np.asarray(x, dtype=float) - 1.0) ** 2
    return sq / (2.0 * (1.0 + delta)), sq / (2.0 * (1.0 - delta))


def v_bounds_as_displayed(x, delta: float):
    """The two-sided estimate with its two sides swapped.

    Returns ``(lower, upper) = ((x-1)^2/(2(1-delta)), (x-1)^2/(2(1+delta)))``.
    This pair is reversed: the "lower" side majorises ``v`` near ``x = 1``.
    Kept only so tests can show that.
    """
    lo, hi = v_quadratic_bounds(x, delta)
    return hi, lo


def _f(T, V, P: ModelParams):
    return P.k * T * V / (1.0 + P.k1 * T + P.k2 * V)


def delay_hat(delay: DelaySpec, eq: Equilibrium, h: float) -> float:
    """Delay evaluated on the constant segment at the equilibrium."""
    return eval_delay(delay, initial_segment(ConstantHistory(eq.as_array()), h))


class _Ctx:
    """Constants shared by all functionals for one ``(params, eq)`` pair."""

    def __init__(self, P: ModelParams, eq: Equilibrium):
        self.P = P
        self.eq = eq
        self.e = P.survival
        self.fh = _f(eq.That, eq.Vhat, P)
        self.K = (P.delta + P.p * eq.Yhat) * eq.Tstarhat
        if self.fh <= 0.0:
            raise DomainError("f(T_hat, V_hat) must be positive (k > 0)")

    def point_part(self, y):
        """All summands of U except the history integral (rows of ``y``)."""
        P, q = self.P, self.eq
        y = np.atleast_2d(y)
        T, Ts, V, Y, A = y.T
        _positive(y)
        den = 1.0 + P.k1 * q.That + P.k2 * q.Vhat
        first = (T - q.That) - q.That / den * ((1.0 + P.k2 * q.Vhat) * np.log(T / q.That)
                                              + P.k1 * (T - q.That))
        return (self.e * first
                + q.Tstarhat * v(Ts / q.Tstarhat)
                + (P.delta + P.p * q.Yhat) / (P.N * P.delta) * q.Vhat * v(V / q.Vhat)
                + P.p / P.beta * q.Yhat * v(Y / q.Yhat)
                + P.q / (P.N * P.g) * (1.0 + P.p * q.Yhat / P.delta) * q.Ahat * v(A / q.Ahat))

    def g(self, y):
        y = np.atleast_2d(y)
        return v(_f(y[:, 0], y[:, 2], self.P) / self.fh)

    def window_integral(self, traj: Trajectory, t, width, panels: int):
        """``K * int_{t-width}^{t} v(f(u)/f_hat)`` for arrays ``t``, ``width``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        width = np.broadcast_to(np.asarray(width, dtype=float), t.shape)
        s = np.linspace(0.0, 1.0, panels + 1)
        nodes = t[:, None] - width[:, None] * (1.0 - s[None, :])
        vals = self.g(traj.eval_many(nodes.ravel())).reshape(nodes.shape)
        w = np.ones(panels + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return self.K * (width / (3.0 * panels)) * (vals @ w)

    def dissipation(self, y, yd):
        """``D`` given current states ``y`` and delayed states ``yd`` (row-wise)."""
        P, q = self.P, self.eq
        y = np.atleast_2d(y)
        yd = np.atleast_2d(yd)
        _positive(y)
        T, Ts, V = y[:, 0], y[:, 1], y[:, 2]
        den_h = 1.0 + P.k1 * q.That + P.k2 * q.Vhat
        fTVh = _f(T, q.Vhat, P)
        fTV = _f(T, V, P)
        fd = _f(yd[:, 0], yd[:, 2], P)
        sq_T = (T - q.That) ** 2 * self.e * P.d * (1.0 + P.k2 * q.Vhat) / (T * den_h)
        sq_V = ((V - q.Vhat) ** 2 * self.K * P.k2 * (1.0 + P.k1 * T)
                / (q.Vhat * (1.0 + P.k1 * T + P.k2 * q.Vhat) * (1.0 + P.k1 * T + P.k2 * V)))
        vs = (v(self.fh / fTVh) + v(Ts * q.Vhat / (q.Tstarhat * V))
              + v(V / q.Vhat * fTVh / fTV) + v(q.Tstarhat / Ts * fd / self.fh))
        return sq_T + sq_V + self.K * vs


def _positive(y):
    if np.any(~(y > 0.0)):
        raise DomainError("Lyapunov functionals need strictly positive coordinates")


def _eta_at(traj: Trajectory, delay: DelaySpec, t):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if isinstance(delay, Custom):
        return np.array([eval_delay(delay, traj.segment_at(ti)) for ti in t])
    return delay_of_states(delay, traj.eval_many(t), traj.h)


def deta_dt(t: float, traj: Trajectory, delay: DelaySpec) -> float:
    """Centred difference of ``eta(u_t)`` over the knots adjacent to ``t``.

    One-sided at the ends of the run. Zero for a constant delay.
    """
    if isinstance(delay, Constant):
        return 0.0
    i = traj.knot_index(t)
    if i is None:
        step = float(np.min(np.diff(traj.t))) if traj.n_knots > 1 else 1e-6
        lo, hi = max(t - step, traj.t0), min(t + step, traj.t_last)
    else:
        lo = traj.t[max(i - 1, 0)]
        hi = traj.t[min(i + 1, traj.n_knots - 1)]
    if hi <= lo:
        return 0.0
    e = _eta_at(traj, delay, [lo, hi])
    return float((e[1] - e[0]) / (hi - lo))


# single-time API ------------------------------------------------------------

def U1(t: float, traj: Trajectory, params: ModelParams, eq: Equilibrium, delay_hat: float,
       qcfg: QuadratureConfig = QuadratureConfig()) -> float:
    """Constant-window functional at time ``t``."""
    c = _Ctx(params, eq)
    y = traj.eval_many([t])
    return float(c.point_part(y)[0] + c.window_integral(traj, [t], delay_hat, qcfg.panels)[0])


def D1(t: float, traj: Trajectory, params: ModelParams, eq: Equilibrium, delay_hat: float) -> float:
    c = _Ctx(params, eq)
    return float(c.dissipation(traj.eval_many([t]), traj.eval_many([t - delay_hat]))[0])


def S1(t: float, traj: Trajectory, params: ModelParams, eq: Equilibrium, delay: DelaySpec,
       delay_hat: float) -> float:
    """``e^{-omega h} (1 - T*_hat/T*) [f(u(t - eta(u_t))) - f(u(t - eta_hat))]``."""
    P = params
    y = traj.eval_many([t])[0]
    if not y[1] > 0.0:
        raise DomainError("S1 needs T* > 0")
    eta = float(_eta_at(traj, delay, [t])[0])
    a, b = traj.eval_many([t - eta, t - delay_hat])
    return float(P.survival * (1.0 - eq.Tstarhat / y[1]) * (_f(a[0], a[2], P) - _f(b[0], b[2], P)))


def Usdd(t: float, traj: Trajectory, params: ModelParams, eq: Equilibrium, delay: DelaySpec,
         qcfg: QuadratureConfig = QuadratureConfig()) -> float:
    """State-dependent-window functional at time ``t``."""
    c = _Ctx(params, eq)
    eta = _eta_at(traj, delay, [t])
    return float(c.point_part(traj.eval_many([t]))[0] + c.window_integral(traj, [t], eta, qcfg.panels)[0])


def Dsdd(t: float, traj: Trajectory, params: ModelParams, eq: Equilibrium, delay: DelaySpec) -> float:
    c = _Ctx(params, eq)
    eta = float(_eta_at(traj, delay, [t])[0])
    return float(c.dissipation(traj.eval_many([t]), traj.eval_many([t - eta]))[0])


def Ssdd(t: float, traj: Trajectory, params: ModelParams, eq: Equilibrium, delay: DelaySpec,
         deta: float | None = None) -> float:
    """``(delta + p Y_hat) T*_hat v(f(u(t - eta(u_t)))/f_hat) d eta/dt``.

    ``deta`` defaults to :func:`deta_dt`.
    """
    c = _Ctx(params, eq)
    if deta is None:
        deta = deta_dt(t, traj, delay)
    eta = float(_eta_at(traj, delay, [t])[0])
    return float(c.K * c.g(traj.eval_many([t - eta]))[0] * deta)


# series ----------------------------------------------------------------------

class LyapunovSample(NamedTuple):
    t: float
    U: float
    D: float
    S: float
    dU_fd: float
    eta: float
    deta_fd: float


LYAPUNOV_HEADER = LyapunovSample._fields


@dataclass(frozen=True)
class LyapunovSeries:
    """``U, D, S`` and finite-difference diagnostics at a run's knots."""

    functional: str
    t: np.ndarray
    U: np.ndarray
    D: np.ndarray
    S: np.ndarray
    dU_fd: np.ndarray
    eta: np.ndarray
    deta_fd: np.ndarray

    def __len__(self):
        return self.t.size

    def samples(self) -> Iterator[LyapunovSample]:
        for row in zip(self.t, self.U, self.D, self.S, self.dU_fd, self.eta, self.deta_fd):
            yield LyapunovSample(*map(float, row))

    def residual(self) -> np.ndarray:
        """``|dU_fd - (-D + S)|`` per sample."""
        return np.abs(self.dU_fd - (self.S - self.D))

    def write_csv(self, target) -> None:
        def emit(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LYAPUNOV_HEADER)
            for s in self.samples():
                w.writerow([format(x, ".17g") for x in s])
        if hasattr(target, "write"):
            emit(target)
        else:
            with open(target, "w", newline="", encoding="utf-8") as fh:
                emit(fh)


def lyapunov_series(traj: Trajectory, params: ModelParams, eq: Equilibrium, delay: DelaySpec,
                    functional: str = "u1", qcfg: QuadratureConfig = QuadratureConfig(),
                    t_from: float | None = None) -> LyapunovSeries:
    """Evaluate one functional and its decomposition at every knot with ``t >= t_from``.

    ``t_from`` defaults to ``t0 + h`` so that the full history window lies on
    the computed solution. ``dU_fd`` and ``deta_fd`` are second-order
    differences over the knots (one-sided at the two ends).
    """
    if functional not in ("u1", "usdd"):
        raise ValueError("functional must be 'u1' or 'usdd'")
    if t_from is None:
        t_from = traj.t0 + traj.h
    c = _Ctx(params, eq)
    t = np.asarray(traj.t[traj.t >= t_from - 1e-12], dtype=float)
    if t.size < 3:
        raise DomainError("need at least three knots after t_from")
    y = traj.eval_many(t)
    eta = _eta_at(traj, delay, t)
    eta_h = delay_hat(delay, eq, traj.h)
    deta = np.gradient(eta, t)
    y_sdd = traj.eval_many(t - eta)
    if functional == "u1":
        U = c.point_part(y) + c.window_integral(traj, t, eta_h, qcfg.panels)
        y_hat = traj.eval_many(t - eta_h)
        D = c.dissipation(y, y_hat)
        S = c.e * (1.0 - eq.Tstarhat / y[:, 1]) * (_f(y_sdd[:, 0], y_sdd[:, 2], params)
                                                  - _f(y_hat[:, 0], y_hat[:, 2], params))
    else:
        U = c.point_part(y) + c.window_integral(traj, t, eta, qcfg.panels)
        D = c.dissipation(y, y_sdd)
        S = c.K * c.g(y_sdd) * deta
    dU = np.gradient(U, t)
    return LyapunovSeries(functional, t, U, D, S, dU, eta, deta)


def is_nonincreasing(values, tol: float = 1e-9) -> bool:
    """True iff every successive increase is at most ``tol``."""
    values = np.asarray(values, dtype=float)
    return bool(values.size < 2 or np.max(np.diff(values)) <= tol)


# algebraic identities --------------------------------------------------------

def identity_bd(T, V, params: ModelParams, eq: Equilibrium):
    """Both sides of the incidence identity behind the ``(V - V_hat)^2`` term of ``D``.

    ``V/Vh - f(T,V)/f(T,Vh) + 1 - (V/Vh) f(T,Vh)/f(T,V)`` and
    ``(V-Vh)^2 k2 (1+k1 T) / (Vh (1+k1 T+k2 Vh)(1+k1 T+k2 V))``.
    """
    P = params
    T = np.asarray(T, dtype=float)
    V = np.asarray(V, dtype=float)
    Vh = eq.Vhat
    fTV = _f(T, V, P)
    fTVh = _f(T, Vh, P)
    lhs = V / Vh - fTV / fTVh + 1.0 - V / Vh * fTVh / fTV
    rhs = (V - Vh) ** 2 * P.k2 * (1.0 + P.k1 * T) / (Vh * (1.0 + P.k1 * T + P.k2 * Vh)
                                                    * (1.0 + P.k1 * T + P.k2 * V))
    return lhs, rhs


def log_split_ratios(state, delayed, params: ModelParams, eq: Equilibrium):
    """The four ratios whose product is ``f(delayed)/f(current)``."""
    P = params
    T, Ts, V = state[0], state[1], state[2]
    fh = _f(eq.That, eq.Vhat, P)
    fTVh = _f(T, eq.Vhat, P)
    fTV = _f(T, V, P)
    fd = _f(delayed[0], delayed[2], P)
    return (fh / fTVh,
            Ts * eq.Vhat / (eq.Tstarhat * V),
            V / eq.Vhat * fTVh / fTV,
            eq.Tstarhat / Ts * fd / fh)


def log_split_check(t: float, traj: Trajectory, params: ModelParams, eq: Equilibrium,
                    delay_hat: float):
    """``(ln(f(u(t - eta_hat))/f(u(t))), sum of the four split logarithms)``."""
    y, yd = traj.eval_many([t, t - delay_hat])
    return log_split_pair(y, yd, params, eq)


def log_split_pair(state, delayed, params: ModelParams, eq: Equilibrium):
    if not all(x > 0.0 for x in (state[0], state[1], state[2], delayed[0], delayed[2])):
        raise DomainError("log split needs positive ratios")
    ratios = log_split_ratios(state, delayed, params, eq)
    if any(not r > 0.0 for r in ratios):
        raise DomainError("log split needs positive ratios")
    lhs = math.log(_f(delayed[0], delayed[2], params) / _f(state[0], state[2], params))
    return lhs, float(sum(math.log(r) for r in ratios))


def lipschitz_f_bounds(params: ModelParams, box, grid: int = 201, safety: float = 1.0):
    """Bounds ``(L1, L2)`` on ``|df/dT|`` and ``|df/dV|`` over ``box = ((T0, T1), (V0, V1))``.

    The partials are evaluated on a ``grid x grid`` lattice that includes the
    corners. Both partials are monotone in each argument on the non-negative
    quadrant, so the lattice maximum is the true supremum; ``safety`` can still
    inflate it.
    """
    (T0, T1), (V0, V1) = box
    if min(T0, V0) < 0.0 or T1 < T0 or V1 < V0:
        raise DomainError("box must lie in the non-negative quadrant with lo <= hi")
    P = params
    Tg, Vg = np.meshgrid(np.linspace(T0, T1, grid), np.linspace(V0, V1, grid), indexing="ij")
    den = 1.0 + P.k1 * Tg + P.k2 * Vg
    fT = P.k * Vg * (1.0 + P.k2 * Vg) / den**2
    fV = P.k * Tg * (1.0 + P.k1 * Tg) / den**2
    return safety * float(np.abs(fT).max()), safety * float(np.abs(fV).max())
