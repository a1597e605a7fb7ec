"""Numeric inner loops.

Everything here operates on flat float64 arrays so it can be compiled by
numba; see :mod:`virsdd._jit` for the switch. The parameter vector layout is
given by the index constants below (``ModelParams.as_array`` produces it).

History tables
--------------
The initial function on ``[t0 - h, t0]`` is passed as ``(pt, py, pdl, pdr)``:
``pt`` are absolute knot times ending at ``t0``, ``py`` values, and
``pdl``/``pdr`` the derivatives used at the left/right end of each interval.
Separate one-sided slopes let piecewise-linear data be represented exactly.
Solution knots ``(tk, yk, dyk)`` start at ``t0`` and share derivatives.
"""
import math

import numpy as np

from ._jit import USE_NUMBA, njit

LAM, D, K, K1, K2, DELTA, P, N, C, Q, BETA, GAMMA, G, B, OMEGA, H = range(16)
NPARAMS = 16

FAMILY_CONSTANT = 0
FAMILY_POINTWISE_QUADRATIC = 1
FAMILY_RECIPROCAL = 2

STATUS_OK = 0
STATUS_FP_FAILURE = 1
STATUS_BLOWUP = 2


@njit(cache=True)
def response(T, V, k, k1, k2):
    return k * T * V / (1.0 + k1 * T + k2 * V)


@njit(cache=True)
def rhs_into(p, y, Td, Vd, out):
    T = y[0]
    Ts = y[1]
    V = y[2]
    Y = y[3]
    A = y[4]
    f_now = response(T, V, p[K], p[K1], p[K2])
    f_del = response(Td, Vd, p[K], p[K1], p[K2])
    out[0] = p[LAM] - p[D] * T - f_now
    out[1] = math.exp(-p[OMEGA] * p[H]) * f_del - p[DELTA] * Ts - p[P] * Y * Ts
    out[2] = p[N] * p[DELTA] * Ts - p[C] * V - p[Q] * A * V
    out[3] = p[BETA] * Ts * Y - p[GAMMA] * Y
    out[4] = p[G] * A * V - p[B] * A


@njit(cache=True)
def gershgorin_rate(p, y):
    """Max absolute row sum of the Jacobian in the current state."""
    T = y[0]
    Ts = y[1]
    V = y[2]
    Y = y[3]
    A = y[4]
    den = 1.0 + p[K1] * T + p[K2] * V
    fT = abs(p[K] * V * (1.0 + p[K2] * V) / (den * den))
    fV = abs(p[K] * T * (1.0 + p[K1] * T) / (den * den))
    r0 = p[D] + fT + fV
    r1 = abs(p[DELTA] + p[P] * Y) + p[P] * abs(Ts)
    r2 = p[N] * p[DELTA] + abs(p[C] + p[Q] * A) + p[Q] * abs(V)
    r3 = p[BETA] * abs(Y) + abs(p[BETA] * Ts - p[GAMMA])
    r4 = p[G] * abs(A) + abs(p[G] * V - p[B])
    return max(r0, r1, r2, r3, r4)


@njit(cache=True)
def _hermite_basis(ta, tb, s):
    hs = tb - ta
    x = (s - ta) / hs
    xm = 1.0 - x
    h00 = (1.0 + 2.0 * x) * xm * xm
    h10 = x * xm * xm * hs
    h01 = x * x * (3.0 - 2.0 * x)
    h11 = x * x * (x - 1.0) * hs
    return h00, h10, h01, h11


@njit(cache=True)
def hermite_into(ta, tb, ya, ma, yb, mb, s, out):
    h00, h10, h01, h11 = _hermite_basis(ta, tb, s)
    for i in range(5):
        out[i] = h00 * ya[i] + h10 * ma[i] + h01 * yb[i] + h11 * mb[i]


@njit(cache=True)
def _hermite_comp(ta, tb, ya, ma, yb, mb, s, i):
    h00, h10, h01, h11 = _hermite_basis(ta, tb, s)
    return h00 * ya[i] + h10 * ma[i] + h01 * yb[i] + h11 * mb[i]


@njit(cache=True)
def _initial_index(pt, s):
    m = pt.shape[0] - 1
    j = np.searchsorted(pt, s, side="right") - 1
    if j < 0:
        j = 0
    if j > m - 1:
        j = m - 1
    return j


@njit(cache=True)
def _knot_index(tk, n_last, s):
    j = np.searchsorted(tk[: n_last + 1], s, side="right") - 1
    if j < 0:
        j = 0
    if j > n_last - 1:
        j = n_last - 1
    return j


@njit(cache=True)
def history_into(s, tk, yk, dyk, n_last, pt, py, pdl, pdr, out):
    """Evaluate the stored solution at ``s`` (no domain check)."""
    if s <= tk[0] or n_last == 0:
        if pt.shape[0] == 1:
            for i in range(5):
                out[i] = py[0, i]
            return
        if s >= pt[pt.shape[0] - 1]:
            for i in range(5):
                out[i] = py[pt.shape[0] - 1, i]
            return
        j = _initial_index(pt, s)
        hermite_into(pt[j], pt[j + 1], py[j], pdl[j], py[j + 1], pdr[j], s, out)
        return
    j = _knot_index(tk, n_last, s)
    hermite_into(tk[j], tk[j + 1], yk[j], dyk[j], yk[j + 1], dyk[j + 1], s, out)


@njit(cache=True)
def history_TV(s, tk, yk, dyk, n_last, pt, py, pdl, pdr):
    if s <= tk[0] or n_last == 0:
        mp = pt.shape[0]
        if mp == 1 or s >= pt[mp - 1]:
            return py[mp - 1, 0], py[mp - 1, 2]
        j = _initial_index(pt, s)
        T = _hermite_comp(pt[j], pt[j + 1], py[j], pdl[j], py[j + 1], pdr[j], s, 0)
        V = _hermite_comp(pt[j], pt[j + 1], py[j], pdl[j], py[j + 1], pdr[j], s, 2)
        return T, V
    j = _knot_index(tk, n_last, s)
    T = _hermite_comp(tk[j], tk[j + 1], yk[j], dyk[j], yk[j + 1], dyk[j + 1], s, 0)
    V = _hermite_comp(tk[j], tk[j + 1], yk[j], dyk[j], yk[j + 1], dyk[j + 1], s, 2)
    return T, V


@njit(cache=True)
def history_many(s_arr, tk, yk, dyk, n_last, pt, py, pdl, pdr):
    out = np.empty((s_arr.shape[0], 5))
    for m in range(s_arr.shape[0]):
        history_into(s_arr[m], tk, yk, dyk, n_last, pt, py, pdl, pdr, out[m])
    return out


def history_many_numpy(s_arr, tk, yk, dyk, n_last, pt, py, pdl, pdr):
    """Vectorised numpy twin of :func:`history_many`."""
    s_arr = np.asarray(s_arr, dtype=float)
    out = np.empty((s_arr.shape[0], 5))
    if s_arr.shape[0] == 0:
        return out
    init = (s_arr <= tk[0]) | (n_last == 0)
    if np.any(init):
        s = s_arr[init]
        mp = pt.shape[0]
        if mp == 1:
            out[init] = py[0]
        else:
            j = np.clip(np.searchsorted(pt, s, side="right") - 1, 0, mp - 2)
            vals = _hermite_vec(pt[j], pt[j + 1], py[j], pdl[j], py[j + 1], pdr[j], s)
            vals[s >= pt[-1]] = py[-1]
            out[init] = vals
    rest = ~init
    if np.any(rest):
        s = s_arr[rest]
        j = np.clip(np.searchsorted(tk[: n_last + 1], s, side="right") - 1, 0, n_last - 1)
        out[rest] = _hermite_vec(tk[j], tk[j + 1], yk[j], dyk[j], yk[j + 1], dyk[j + 1], s)
    return out


def _hermite_vec(ta, tb, ya, ma, yb, mb, s):
    hs = (tb - ta)[:, None]
    x = ((s - ta) / (tb - ta))[:, None]
    xm = 1.0 - x
    return ((1.0 + 2.0 * x) * xm * xm * ya + x * xm * xm * hs * ma
            + x * x * (3.0 - 2.0 * x) * yb + x * x * (x - 1.0) * hs * mb)


@njit(cache=True)
def catalog_tau(dpar, h, s, ynow, tk, yk, dyk, n, tnew, prov_y, prov_dy, pt, py, pdl, pdr):
    """Delay of the built-in families; all read only the current state."""
    fam = int(dpar[0])
    if fam == FAMILY_CONSTANT:
        return dpar[1], False
    if fam == FAMILY_POINTWISE_QUADRATIC:
        dT = ynow[0] - dpar[4]
        dV = ynow[2] - dpar[5]
        val = dpar[1] + dpar[2] * dT * dT + dpar[3] * dV * dV
        if val < dpar[6]:
            val = dpar[6]
        if val > h:
            val = h
        return val, False
    V = ynow[2]
    if V < 0.0:
        V = 0.0
    return dpar[1] + (dpar[2] - dpar[1]) / (1.0 + dpar[3] * V), False


def build_integrator(tau_fn, jit=True):
    """Return the method-of-steps loop specialised on ``tau_fn``.

    ``tau_fn(dpar, h, s, ynow, tk, yk, dyk, n, tnew, prov_y, prov_dy,
    pt, py, pdl, pdr) -> (tau, used_provisional)``.
    """

    def integrate_loop(p, dpar, pt, py, pdl, pdr, t0, dt, t_end, fp_tol,
                       fp_maxiter, stiff_cap):
        h = p[H]
        n_nom = int(math.ceil((t_end - t0) / dt - 1e-9))
        if n_nom < 0:
            n_nom = 0
        cap = n_nom + 1 + 16
        tk = np.empty(cap)
        yk = np.empty((cap, 5))
        dyk = np.empty((cap, 5))
        tk[0] = t0
        for i in range(5):
            yk[0, i] = py[py.shape[0] - 1, i]
        ystage = np.empty(5)
        k1v = np.empty(5)
        k2v = np.empty(5)
        k3v = np.empty(5)
        k4v = np.empty(5)
        y_new = np.empty(5)
        dy_new = np.empty(5)
        prov_y = np.empty(5)
        prov_dy = np.empty(5)

        # derivative at t0 uses the initial function only
        tau, _ = tau_fn(dpar, h, t0, yk[0], tk, yk, dyk, 0, t0, prov_y, prov_dy,
                        pt, py, pdl, pdr)
        Td, Vd = history_TV(t0 - tau, tk, yk, dyk, 0, pt, py, pdl, pdr)
        rhs_into(p, yk[0], Td, Vd, dyk[0])

        n = 0
        status = STATUS_OK
        fail_t = 0.0
        fail_res = 0.0
        for kk in range(1, n_nom + 1):
            t_target = t0 + kk * dt
            if kk == n_nom or t_target > t_end:
                t_target = t_end
            while tk[n] < t_target:
                t_cur = tk[n]
                hstep = t_target - t_cur
                t_new = t_target
                if stiff_cap > 0.0:
                    rho = gershgorin_rate(p, yk[n])
                    if rho * hstep > stiff_cap:
                        hstep = stiff_cap / rho
                        t_new = t_cur + hstep
                if n + 1 >= tk.shape[0]:
                    cap2 = 2 * tk.shape[0]
                    tk2 = np.empty(cap2)
                    yk2 = np.empty((cap2, 5))
                    dyk2 = np.empty((cap2, 5))
                    tk2[: n + 1] = tk[: n + 1]
                    yk2[: n + 1] = yk[: n + 1]
                    dyk2[: n + 1] = dyk[: n + 1]
                    tk = tk2
                    yk = yk2
                    dyk = dyk2
                yn = yk[n]
                dyn = dyk[n]
                for i in range(5):
                    prov_y[i] = yn[i] + hstep * dyn[i]
                    prov_dy[i] = dyn[i]
                for i in range(5):
                    k1v[i] = dyn[i]
                converged = False
                finite = True
                res = 0.0
                for it in range(fp_maxiter):
                    overlap = False
                    # stage 2
                    s = t_cur + 0.5 * hstep
                    for i in range(5):
                        ystage[i] = yn[i] + 0.5 * hstep * k1v[i]
                    tau, used = tau_fn(dpar, h, s, ystage, tk, yk, dyk, n, t_new,
                                       prov_y, prov_dy, pt, py, pdl, pdr)
                    overlap = overlap or used
                    r = s - tau
                    if r > t_cur:
                        overlap = True
                        Td = _hermite_comp(t_cur, t_new, yn, dyn, prov_y, prov_dy, r, 0)
                        Vd = _hermite_comp(t_cur, t_new, yn, dyn, prov_y, prov_dy, r, 2)
                    else:
                        Td, Vd = history_TV(r, tk, yk, dyk, n, pt, py, pdl, pdr)
                    rhs_into(p, ystage, Td, Vd, k2v)
                    # stage 3
                    for i in range(5):
                        ystage[i] = yn[i] + 0.5 * hstep * k2v[i]
                    tau, used = tau_fn(dpar, h, s, ystage, tk, yk, dyk, n, t_new,
                                       prov_y, prov_dy, pt, py, pdl, pdr)
                    overlap = overlap or used
                    r = s - tau
                    if r > t_cur:
                        overlap = True
                        Td = _hermite_comp(t_cur, t_new, yn, dyn, prov_y, prov_dy, r, 0)
                        Vd = _hermite_comp(t_cur, t_new, yn, dyn, prov_y, prov_dy, r, 2)
                    else:
                        Td, Vd = history_TV(r, tk, yk, dyk, n, pt, py, pdl, pdr)
                    rhs_into(p, ystage, Td, Vd, k3v)
                    # stage 4
                    s = t_new
                    for i in range(5):
                        ystage[i] = yn[i] + hstep * k3v[i]
                    tau, used = tau_fn(dpar, h, s, ystage, tk, yk, dyk, n, t_new,
                                       prov_y, prov_dy, pt, py, pdl, pdr)
                    overlap = overlap or used
                    r = s - tau
                    if r > t_cur:
                        overlap = True
                        Td = _hermite_comp(t_cur, t_new, yn, dyn, prov_y, prov_dy, r, 0)
                        Vd = _hermite_comp(t_cur, t_new, yn, dyn, prov_y, prov_dy, r, 2)
                    else:
                        Td, Vd = history_TV(r, tk, yk, dyk, n, pt, py, pdl, pdr)
                    rhs_into(p, ystage, Td, Vd, k4v)
                    for i in range(5):
                        y_new[i] = yn[i] + hstep / 6.0 * (
                            k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])
                    # knot derivative, possibly reading the provisional extension
                    tau, used = tau_fn(dpar, h, t_new, y_new, tk, yk, dyk, n, t_new,
                                       prov_y, prov_dy, pt, py, pdl, pdr)
                    overlap = overlap or used
                    r = t_new - tau
                    if r > t_cur:
                        overlap = True
                        Td = _hermite_comp(t_cur, t_new, yn, dyn, prov_y, prov_dy, r, 0)
                        Vd = _hermite_comp(t_cur, t_new, yn, dyn, prov_y, prov_dy, r, 2)
                    else:
                        Td, Vd = history_TV(r, tk, yk, dyk, n, pt, py, pdl, pdr)
                    rhs_into(p, y_new, Td, Vd, dy_new)
                    finite = True
                    for i in range(5):
                        if not (math.isfinite(y_new[i]) and math.isfinite(dy_new[i])):
                            finite = False
                    if not finite:
                        break
                    if not overlap:
                        converged = True
                        break
                    res = 0.0
                    for i in range(5):
                        e1 = abs(y_new[i] - prov_y[i]) / (1.0 + abs(y_new[i]))
                        e2 = abs(dy_new[i] - prov_dy[i]) / (1.0 + abs(dy_new[i]))
                        if e1 > res:
                            res = e1
                        if e2 > res:
                            res = e2
                    for i in range(5):
                        prov_y[i] = y_new[i]
                        prov_dy[i] = dy_new[i]
                    if res < fp_tol:
                        converged = True
                        break
                if not finite:
                    status = STATUS_BLOWUP
                    fail_t = t_new
                    break
                if not converged:
                    status = STATUS_FP_FAILURE
                    fail_t = t_new
                    fail_res = res
                    break
                n += 1
                tk[n] = t_new
                for i in range(5):
                    yk[n, i] = y_new[i]
                    dyk[n, i] = dy_new[i]
            if status != STATUS_OK:
                break
        return status, n, tk[: n + 1].copy(), yk[: n + 1].copy(), dyk[: n + 1].copy(), fail_t, fail_res

    if jit and USE_NUMBA:
        return njit(nogil=True)(integrate_loop)
    return integrate_loop


_catalog_loop = None


def catalog_integrator():
    global _catalog_loop
    if _catalog_loop is None:
        _catalog_loop = build_integrator(catalog_tau, jit=True)
    return _catalog_loop


@njit(cache=True)
def linear_envelope(forcing, l0, c2, dt):
    """Upper solution of ``l' <= F(t) - c2 l`` with ``F`` bounded by ``forcing[j]``
    on ``[j dt, (j+1) dt]``; returns the value at each grid point and the
    running maximum over each interval."""
    m = forcing.shape[0]
    vals = np.empty(m + 1)
    sup = np.empty(m)
    decay = math.exp(-c2 * dt)
    vals[0] = l0
    for j in range(m):
        eq = forcing[j] / c2
        vals[j + 1] = eq + (vals[j] - eq) * decay
        sup[j] = max(vals[j], vals[j + 1])
    return vals, sup
