"""Method-of-steps integration with state-dependent delayed lookups.

Each step is a classical four-stage Runge-Kutta step. Delayed arguments are
read from the dense output; when ``s - eta(u_s)`` falls inside the step being
computed, the step's own Hermite extension is used and the step is repeated
as a fixed-point iteration until the endpoint settles.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .delay import Custom, DelaySpec, _custom_value, eval_delay, kernel_params
from .errors import BlowupError, DomainError, StepFailureError
from .history import HistorySegment, Trajectory, as_initial, initial_segment
from .model import ModelParams, rhs


@dataclass(frozen=True)
class SimConfig:
    """Step control.

    ``stiff_cap`` limits each step so that ``dt * rho <= stiff_cap`` where
    ``rho`` is the max row sum of the Jacobian in the current state; steps are
    subdivided inside a nominal interval and always land on the nominal grid.
    Set it to 0 for strictly uniform steps.
    """

    dt: float = 0.01
    t_end: float = 100.0
    fp_tol: float = 1e-12
    fp_maxiter: int = 25
    output_stride: int = 1
    stiff_cap: float = 1.0

    def __post_init__(self):
        for name in ("dt", "fp_tol"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0.0):
                raise DomainError(f"{name} must be finite and > 0, got {val!r}")
        if not (math.isfinite(self.t_end) and self.t_end >= 0.0):
            raise DomainError(f"t_end must be finite and >= 0, got {self.t_end!r}")
        if int(self.fp_maxiter) != self.fp_maxiter or self.fp_maxiter < 1:
            raise DomainError("fp_maxiter must be an integer >= 1")
        if int(self.output_stride) != self.output_stride or self.output_stride < 1:
            raise DomainError("output_stride must be an integer >= 1")
        if not (math.isfinite(self.stiff_cap) and self.stiff_cap >= 0.0):
            raise DomainError("stiff_cap must be finite and >= 0")

    def replace(self, **changes) -> "SimConfig":
        from dataclasses import replace
        return replace(self, **changes)


def _custom_tau(spec: Custom, table):
    pt, py, pdl, pdr = table

    def tau_fn(dpar, h, s, ynow, tk, yk, dyk, n, tnew, prov_y, prov_dy, *_):
        used = False
        t_n = tk[n]
        now = ynow.copy()

        def source(x):
            nonlocal used
            out = np.empty(5)
            if x >= s:
                return now
            if x > t_n:
                used = True
                kernels.hermite_into(t_n, tnew, yk[n], dyk[n], prov_y, prov_dy, x, out)
                return out
            kernels.history_into(x, tk, yk, dyk, n, pt, py, pdl, pdr, out)
            return out

        tau = _custom_value(spec, HistorySegment(source, s, h), h)
        return tau, used

    return tau_fn


def integrate(params: ModelParams, delay: DelaySpec, phi, cfg: SimConfig) -> Trajectory:
    """Integrate the delay system on ``[0, cfg.t_end]`` from the history ``phi``.

    Raises
    ------
    StepFailureError
        The in-step fixed-point iteration did not converge within
        ``cfg.fp_maxiter`` sweeps.
    BlowupError
        The state became non-finite.
    """
    delay.validate(params.h)
    phi = as_initial(phi)
    if cfg.dt > params.h / 4.0:
        warnings.warn(f"dt={cfg.dt} exceeds h/4={params.h / 4.0}; delayed lookups may overlap the current step",
                      stacklevel=2)
    table = phi.table(params.h, 0.0)
    if isinstance(delay, Custom):
        loop = kernels.build_integrator(_custom_tau(delay, table), jit=False)
        dpar = np.zeros(1)
    else:
        loop = kernels.catalog_integrator()
        dpar = kernel_params(delay)
    status, n, t, y, dy, fail_t, fail_res = loop(
        params.as_array(), dpar, *table, 0.0, float(cfg.dt), float(cfg.t_end),
        float(cfg.fp_tol), int(cfg.fp_maxiter), float(cfg.stiff_cap))
    if status == kernels.STATUS_FP_FAILURE:
        raise StepFailureError(fail_t, fail_res)
    if status == kernels.STATUS_BLOWUP:
        raise BlowupError(fail_t)
    return Trajectory(t, y, dy, phi, params.h, params=params, delay=delay)


def check_compatibility(phi, params: ModelParams, delay: DelaySpec) -> float:
    """``max |phi'(0) - F(phi)|``, with ``phi'(0)`` a backward difference of step ``1e-6 h``.

    A small value means ``phi`` lies (numerically) on the solution manifold,
    so the run starts continuously differentiable.
    """
    seg = initial_segment(phi, params.h)
    eps = 1e-6 * params.h
    slope = (seg(0.0) - seg(-eps)) / eps
    tau = eval_delay(delay, seg)
    delayed = seg(-tau)
    F = rhs(seg(0.0), delayed[0], delayed[2], params)
    return float(np.max(np.abs(slope - F)))
