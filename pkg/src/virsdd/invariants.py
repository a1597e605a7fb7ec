"""The invariant box of non-negative bounded histories and related checks.

Membership is tested at the sample points given (knots for a trajectory,
table points for an initial function); between knots the dense output is
within ``O(dt^4)`` of the knot values, which the ``slack`` absorbs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .delay import Custom, DelaySpec, delay_of_states, eval_delay
from .errors import DomainError, UnsupportedFamilyError
from .history import ConstantHistory, InitialFunction, PiecewiseLinearHistory, Trajectory
from .model import STATE_NAMES, ModelParams

CONDITIONS = ("T", "Tstar", "V", "TY", "VA")


@dataclass(frozen=True)
class InvariantBounds:
    """Upper bounds of the invariant box.

    ``comboTY`` bounds ``T* + (p/beta) Y`` and ``comboVA`` bounds
    ``V + (q/g) A``. ``p_over_beta`` and ``q_over_g`` are the two
    combination weights.
    """

    Tmax: float
    Tstarmax: float
    Vmax: float
    comboTY: float
    comboVA: float
    p_over_beta: float
    q_over_g: float

    def widened(self, eps: float) -> "InvariantBounds":
        return InvariantBounds(self.Tmax + eps, self.Tstarmax + eps, self.Vmax + eps,
                               self.comboTY + eps, self.comboVA + eps, self.p_over_beta, self.q_over_g)

    def upper(self) -> np.ndarray:
        return np.array([self.Tmax, self.Tstarmax, self.Vmax, self.comboTY, self.comboVA])


def omega_c_bounds(params: ModelParams) -> InvariantBounds:
    P = params
    if P.k2 <= 0.0:
        raise UnsupportedFamilyError("the invariant box needs k2 > 0")
    e = P.survival
    kl = P.k * P.lam
    return InvariantBounds(
        Tmax=P.lam / P.d,
        Tstarmax=kl * e / (P.d * P.k2 * P.delta),
        Vmax=P.N * kl * e / (P.c * P.d * P.k2),
        comboTY=kl**2 * e**2 / (P.d**2 * P.c * P.k2 * min(P.delta, P.gamma)),
        comboVA=P.N * kl * e / (P.d * P.k2 * min(P.c, P.b)),
        p_over_beta=P.p / P.beta,
        q_over_g=P.q / P.g,
    )


def scaled_bounds_state(bounds: InvariantBounds, factor: float) -> np.ndarray:
    """State with ``T, T*, V`` and both combinations at ``factor`` times their bounds."""
    return factor * np.array([bounds.Tmax, bounds.Tstarmax, bounds.Vmax,
                              (bounds.comboTY - bounds.Tstarmax) / bounds.p_over_beta,
                              (bounds.comboVA - bounds.Vmax) / bounds.q_over_g])


def combo_validity_margin(params: ModelParams) -> float:
    """``k lambda e^{-omega h} / (d c)``.

    The ``comboTY`` bound is forward invariant when this is ``>= 1``; in
    that case it dominates the bound obtained from ``f <= k T / k2``.
    """
    return params.k * params.lam * params.survival / (params.d * params.c)


def conditions(values, bounds: InvariantBounds) -> np.ndarray:
    """Columns ``T, T*, V, T* + (p/beta)Y, V + (q/g)A`` for rows of states."""
    y = np.atleast_2d(np.asarray(values, dtype=float))
    return np.column_stack([y[:, 0], y[:, 1], y[:, 2],
                            y[:, 1] + bounds.p_over_beta * y[:, 3],
                            y[:, 2] + bounds.q_over_g * y[:, 4]])


class OmegaReport(NamedTuple):
    """Membership verdict; on failure the first violation."""

    ok: bool
    t: float | None = None
    coordinate: str | None = None
    margin: float = 0.0

    def __bool__(self):
        return self.ok


def _samples(window, h):
    if isinstance(window, Trajectory):
        pt, py, _, _ = window.initial.table(window.h, window.t0)
        return np.concatenate([pt[:-1], window.t]), np.vstack([py[:-1], window.y])
    if isinstance(window, PiecewiseLinearHistory):
        return np.asarray(window.thetas), np.asarray(window.values)
    if isinstance(window, InitialFunction):
        if h is None:
            if not isinstance(window, ConstantHistory):
                raise DomainError("pass h to sample a general initial function")
            h = 1.0
        pt, py, _, _ = window.table(h, 0.0)
        return pt, py
    if isinstance(window, tuple) and len(window) == 2:
        t, y = window
        return np.asarray(t, dtype=float), np.atleast_2d(np.asarray(y, dtype=float))
    y = np.atleast_2d(np.asarray(window, dtype=float))
    return np.arange(y.shape[0], dtype=float), y


def in_omega_c(window, bounds: InvariantBounds, slack: float = 0.0, h: float | None = None) -> OmegaReport:
    """Check all box conditions at every sample of ``window``.

    ``window`` is a :class:`Trajectory` (history table plus knots), an
    initial function, a ``(times, states)`` pair or a bare ``(m, 5)`` array.
    Lower bounds are checked on each of the five coordinates. ``h`` is only
    needed for callable initial functions.
    """
    t, y = _samples(window, h)
    if y.size == 0:
        return OmegaReport(True)
    up = conditions(y, bounds) - bounds.upper()[None, :] - slack
    lo = -y - slack
    bad_up = up > 0.0
    bad_lo = lo > 0.0
    rows = np.flatnonzero(bad_up.any(axis=1) | bad_lo.any(axis=1))
    if rows.size == 0:
        return OmegaReport(True)
    i = int(rows[0])
    if bad_lo[i].any():
        j = int(np.argmax(lo[i]))
        return OmegaReport(False, float(t[i]), STATE_NAMES[j] + ">=0", float(lo[i, j] + slack))
    j = int(np.argmax(up[i]))
    return OmegaReport(False, float(t[i]), CONDITIONS[j], float(up[i, j] + slack))


def sample_initial_in_omega_c(params: ModelParams, bounds: InvariantBounds, seed: int,
                              lipschitz_cap: float = 10.0, knots: int = 9) -> PiecewiseLinearHistory:
    """Seeded piecewise-linear history inside the invariant box.

    Every coordinate performs a random walk whose increments are bounded by
    ``lipschitz_cap`` per unit time, clipped to its admissible range. ``Y``
    and ``A`` are clipped to what the combination bounds leave after ``T*``
    and ``V``; the slope bound is guaranteed for ``T``, ``T*`` and ``V``.
    """
    if lipschitz_cap < 0.0:
        raise DomainError("lipschitz_cap must be >= 0")
    rng = np.random.default_rng(seed)
    h = params.h
    thetas = np.linspace(-h, 0.0, knots)
    step = lipschitz_cap * (thetas[1] - thetas[0])
    shrink = 1.0 - 1e-12
    hi3 = np.array([bounds.Tmax, min(bounds.Tstarmax, bounds.comboTY), min(bounds.Vmax, bounds.comboVA)])
    vals = np.empty((knots, 5))
    cur = rng.uniform(0.0, 1.0, 5)
    vals[0, :3] = cur[:3] * hi3
    for i in range(1, knots):
        move = rng.uniform(-1.0, 1.0, 5) * step
        vals[i, :3] = np.clip(vals[i - 1, :3] + move[:3], 0.0, hi3)
    ymax = (bounds.comboTY - vals[:, 1]) / bounds.p_over_beta * shrink
    amax = (bounds.comboVA - vals[:, 2]) / bounds.q_over_g * shrink
    vals[0, 3] = cur[3] * ymax[0]
    vals[0, 4] = cur[4] * amax[0]
    for i in range(1, knots):
        move = rng.uniform(-1.0, 1.0, 2) * step
        vals[i, 3] = min(max(vals[i - 1, 3] + move[0], 0.0), ymax[i])
        vals[i, 4] = min(max(vals[i - 1, 4] + move[1], 0.0), amax[i])
    return PiecewiseLinearHistory(thetas, vals)


def gronwall_envelope(t, l0: float, c1: float, c2: float) -> np.ndarray:
    """``(l0 - c1/c2) e^{-c2 (t - t[0])} + c1/c2``."""
    t = np.asarray(t, dtype=float)
    return (l0 - c1 / c2) * np.exp(-c2 * (t - t[0])) + c1 / c2


def gronwall_check(t, trace, c1: float, c2: float, envelope: bool = True, tol: float = 1e-9) -> bool:
    """Comparison-lemma check for a sampled path ``trace`` on times ``t``.

    If ``trace`` starts at or below ``c1/c2`` it must stay below it. With
    ``envelope=True`` (the caller knows ``l' <= c1 - c2 l`` holds), the path
    must also stay below the explicit exponential envelope.
    """
    if c2 <= 0.0:
        raise DomainError("c2 must be > 0")
    t = np.asarray(t, dtype=float)
    ell = np.asarray(trace, dtype=float)
    if ell.size == 0:
        return True
    level = c1 / c2
    if ell[0] <= level and np.any(ell > level + tol):
        return False
    if envelope and np.any(ell > gronwall_envelope(t, ell[0], c1, c2) + tol):
        return False
    return True


def absorbing_time(traj: Trajectory, bounds: InvariantBounds, epsilon: float) -> float | None:
    """First knot time after which every condition holds with bounds widened by ``epsilon``.

    ``None`` if the last knot is still outside.
    """
    if math.isinf(epsilon):
        return traj.t0
    up = conditions(traj.y, bounds) - (bounds.upper() + epsilon)[None, :]
    bad = np.flatnonzero((up > 0.0).any(axis=1) | (traj.y < 0.0).any(axis=1))
    if bad.size == 0:
        return traj.t0
    last = int(bad[-1])
    if last == traj.n_knots - 1:
        return None
    return float(traj.t[last + 1])


class EnvelopePrediction(NamedTuple):
    time: float
    per_condition: dict


def _window_max(sup, width):
    """``out[j] = max(sup[j - width : j + 1])``."""
    pad = np.concatenate([np.full(width, sup[0]), sup])
    view = np.lib.stride_tricks.sliding_window_view(pad, width + 1)
    return view.max(axis=1)


def envelope_entry_time(params: ModelParams, phi: InitialFunction, bounds: InvariantBounds,
                        epsilon: float, dt: float | None = None, horizon: float | None = None
                        ) -> EnvelopePrediction:
    """Entry time into the widened box predicted by a cascade of comparison systems.

    Every coordinate obeys ``l' <= F(t) - c l`` along non-negative solutions,
    with the forcing bounded by envelopes already computed:

    * ``T' <= lambda - d T``
    * ``T*' <= e^{-omega h} k T(t - eta)/k2 - delta T*``
    * ``V' <= N delta T* - c V``
    * ``(T* + p/beta Y)' <= e^{-omega h} min(k T/k2, k T V)(t - eta) - min(delta, gamma)(...)``
    * ``(V + q/g A)' <= N delta T* - min(c, b)(...)``

    Delayed envelopes are maximised over ``[t - h, t]`` together with the
    history. The returned time is the latest of the five entry times.
    """
    P = params
    h = P.h
    dt = dt if dt is not None else h / 200.0
    if epsilon <= 0.0:
        raise DomainError("epsilon must be > 0")
    pt, py, _, _ = phi.table(h)
    hist = py.max(axis=0)
    now = py[-1]
    c0 = conditions(now[None, :], bounds)[0]
    horizon = horizon if horizon is not None else 50.0 / min(P.d, P.delta, P.c, P.gamma, P.b) + h
    width = int(math.ceil(h / dt))
    limits = bounds.upper() + epsilon
    while True:
        m = int(math.ceil(horizon / dt))
        grid = np.arange(m + 1) * dt
        Tv = P.lam / P.d + (max(hist[0], now[0]) - P.lam / P.d) * np.exp(-P.d * grid)
        Tsup = np.maximum(Tv[:-1], Tv[1:])
        Tdel = np.maximum(_window_max(Tsup, width), np.where(grid[:-1] - h < 0.0, hist[0], 0.0))
        e = P.survival
        Ts_v, Ts_sup = kernels.linear_envelope(e * P.k / P.k2 * Tdel, now[1], P.delta, dt)
        V_v, V_sup = kernels.linear_envelope(P.N * P.delta * Ts_sup, now[2], P.c, dt)
        Vdel = np.maximum(_window_max(V_sup, width), np.where(grid[:-1] - h < 0.0, hist[2], 0.0))
        fbound = np.minimum(P.k * Tdel / P.k2, P.k * Tdel * Vdel)
        TY_v, TY_sup = kernels.linear_envelope(e * fbound, c0[3], min(P.delta, P.gamma), dt)
        VA_v, VA_sup = kernels.linear_envelope(P.N * P.delta * Ts_sup, c0[4], min(P.c, P.b), dt)
        sups = (Tsup, Ts_sup, V_sup, TY_sup, VA_sup)
        entry = {}
        done = True
        for name, sup, lim in zip(CONDITIONS, sups, limits):
            over = np.flatnonzero(sup > lim)
            if over.size == 0:
                entry[name] = 0.0
            elif over[-1] == sup.size - 1:
                done = False
                break
            else:
                entry[name] = float(grid[over[-1] + 1])
        if done:
            return EnvelopePrediction(max(entry.values()), entry)
        horizon *= 2.0


def oracle_integral_representation(traj: Trajectory, params: ModelParams, delay: DelaySpec,
                                   checkpoints: int = 20, panels: int = 256) -> float:
    """Max relative deviation between the integrator and the variation-of-constants formulas.

    ``T*`` and ``V`` are rebuilt from their inhomogeneous linear equations,
    ``Y`` and ``A`` from their exponential growth formulas, at
    ``checkpoints`` knot times spread over the run. Exponents are cumulative
    integrals on the knots (trapezoid with the endpoint-derivative correction,
    fourth order). The convolutions use a product Simpson rule: the kernel at
    the mean decay rate is integrated exactly and only the slowly varying
    remainder is interpolated quadratically, so stationary data are
    reproduced to rounding.
    """
    if panels < 2 or panels % 2:
        raise DomainError("panels must be even and >= 2")
    P = params
    t = traj.t
    y = traj.y
    dy = traj.dy
    if t.size < 2:
        raise DomainError("need a run with at least two knots")

    def cumulative(g, dg):
        dt = np.diff(t)
        inc = 0.5 * dt * (g[:-1] + g[1:]) + dt**2 / 12.0 * (dg[:-1] - dg[1:])
        return np.concatenate([[0.0], np.cumsum(inc)])

    def hermite(G, g, s):
        i = np.clip(np.searchsorted(t, s, side="right") - 1, 0, t.size - 2)
        t0, t1 = t[i], t[i + 1]
        hh = t1 - t0
        x = (s - t0) / hh
        h00 = (1 + 2 * x) * (1 - x) ** 2
        h10 = x * (1 - x) ** 2
        h01 = x * x * (3 - 2 * x)
        h11 = x * x * (x - 1)
        return h00 * G[i] + h10 * hh * g[i] + h01 * G[i + 1] + h11 * hh * g[i + 1]

    gTs = P.delta + P.p * y[:, 3]
    GTs = cumulative(gTs, P.p * dy[:, 3])
    gV = P.c + P.q * y[:, 4]
    GV = cumulative(gV, P.q * dy[:, 4])
    GY = cumulative(P.beta * y[:, 1] - P.gamma, P.beta * dy[:, 1])
    GA = cumulative(P.g * y[:, 2] - P.b, P.g * dy[:, 2])

    picks = np.unique(np.searchsorted(t, np.linspace(t[-1] / checkpoints, t[-1], checkpoints)).clip(1, t.size - 1))
    gx, gw = np.polynomial.legendre.leggauss(8)
    gx = 0.5 * (gx + 1.0)
    # quadratic Lagrange basis on [0, 1] with nodes 0, 1/2, 1
    basis = np.array([(2 * gx - 1) * (gx - 1), 4 * gx * (1 - gx), gx * (2 * gx - 1)])

    def convolve(vals, Gn, Gc, tc):
        # int_{t0}^{tc} vals(s) exp(Gn(s) - Gc) ds
        rate = (Gc - Gn[0]) / (tc - t[0])
        rem = vals * np.exp(Gn - Gc + rate * (tc - nodes))
        width = 2.0 * (tc - t[0]) / panels
        left = nodes[:-1:2]
        kern = np.exp(-rate * (tc - (left[:, None] + width * gx[None, :]))) * (0.5 * width * gw)[None, :]
        mom = kern @ basis.T
        return float(mom[:, 0] @ rem[:-1:2] + mom[:, 1] @ rem[1::2] + mom[:, 2] @ rem[2::2])

    worst = 0.0
    for i in picks:
        tc = t[i]
        nodes = np.linspace(t[0], tc, panels + 1)
        states = traj.eval_many(nodes)
        if isinstance(delay, Custom):
            eta = np.array([eval_delay(delay, traj.segment_at(s)) for s in nodes])
        else:
            eta = delay_of_states(delay, states, traj.h)
        lag = traj.eval_many(nodes - eta)
        f = P.k * lag[:, 0] * lag[:, 2] / (1.0 + P.k1 * lag[:, 0] + P.k2 * lag[:, 2])
        Ts = y[0, 1] * math.exp(-GTs[i]) + P.survival * convolve(f, hermite(GTs, gTs, nodes), GTs[i], tc)
        # T* at the nodes from the dense output, matching the integrator's route
        V = y[0, 2] * math.exp(-GV[i]) + P.N * P.delta * convolve(states[:, 1], hermite(GV, gV, nodes), GV[i], tc)
        Y = y[0, 3] * math.exp(GY[i])
        A = y[0, 4] * math.exp(GA[i])
        rep = np.array([Ts, V, Y, A])
        ref = y[i, 1:]
        scale = np.maximum(np.abs(ref), 1e-300)
        worst = max(worst, float(np.max(np.abs(rep - ref) / scale)))
    return worst
