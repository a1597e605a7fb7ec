"""Command-line front end.

Exit status: 0 when everything passed, 1 when a check failed or a
hypothesis does not hold, 2 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig, describe_keys, parse_config, with_override
from .delay import Constant, PointwiseQuadratic, check_H1
from .equilibrium import equilibrium, h2_sides, h3_sides, solve_That
from .errors import ConfigError, DomainError, HypothesisError, UnsupportedFamilyError, VirSDDError
from .history import ConstantHistory, write_csv
from .integrator import SimConfig, integrate
from .invariants import (absorbing_time, envelope_entry_time, gronwall_check, in_omega_c,
                         omega_c_bounds, oracle_integral_representation, sample_initial_in_omega_c,
                         scaled_bounds_state)
from .lyapunov import identity_bd, is_nonincreasing, log_split_pair, lyapunov_series

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def _load(args) -> RunConfig:
    text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
    cfg = parse_config(text)
    sim = cfg.sim
    if args.dt is not None:
        sim = sim.replace(dt=args.dt)
    if args.t_end is not None:
        sim = sim.replace(t_end=args.t_end)
    init = cfg.init
    if args.seed is not None:
        init = replace(init, seed=args.seed)
    return replace(cfg, sim=sim, init=init)


def _out_path(args, cfg):
    return args.out if args.out is not None else cfg.output_path


def cmd_simulate(args, cfg: RunConfig) -> int:
    out, close = _open_out(_out_path(args, cfg))
    try:
        if cfg.sim.t_end == 0.0:
            write_csv(None, out)
        else:
            traj = integrate(cfg.params, cfg.delay_spec(), cfg.initial(), cfg.sim)
            write_csv(traj, out, cfg.sim.output_stride)
    finally:
        if close:
            out.close()
    return EXIT_OK


def cmd_equilibrium(args, cfg: RunConfig) -> int:
    P = cfg.params
    h2 = h2_sides(P)
    That = solve_That(P)
    h3 = h3_sides(P, That)
    print(f"{'H2':<10} = {str(h2.holds).lower():<5}  {h2.lhs:.10g} > {h2.rhs:.10g}"
          "  (N delta gamma g > beta c b)")
    print(f"{'H3':<10} = {str(h3.holds).lower():<5}  {h3.lhs:.10g} > {h3.rhs:.10g}"
          "  (lambda > d T_hat + delta gamma / beta e^(omega h))")
    try:
        eq = equilibrium(P)
    except HypothesisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for name, val in zip(("T_hat", "Tstar_hat", "V_hat", "Y_hat", "A_hat"), eq.as_array()):
        print(f"{name:<10} = {val:.17g}")
    print(f"{'residual':<10} = {eq.residual:.3e}")
    path = _out_path(args, cfg)
    if path:
        out, close = _open_out(path)
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["That", "Tstarhat", "Vhat", "Yhat", "Ahat", "H2", "H2_lhs", "H2_rhs",
                    "H3", "H3_lhs", "H3_rhs", "residual"])
        w.writerow([format(x, ".17g") for x in eq.as_array()]
                   + [str(h2.holds).lower(), format(h2.lhs, ".17g"), format(h2.rhs, ".17g"),
                      str(h3.holds).lower(), format(h3.lhs, ".17g"), format(h3.rhs, ".17g"),
                      format(eq.residual, ".17g")])
        if close:
            out.close()
    return EXIT_OK


def cmd_lyapunov(args, cfg: RunConfig) -> int:
    eq = equilibrium(cfg.params)
    delay = cfg.delay_spec()
    traj = integrate(cfg.params, delay, cfg.initial(), cfg.sim)
    series = lyapunov_series(traj, cfg.params, eq, delay, args.functional, cfg.quad)
    out, close = _open_out(_out_path(args, cfg))
    try:
        series.write_csv(out)
    finally:
        if close:
            out.close()
    return EXIT_OK


def _functional_for(delay) -> str:
    return "u1" if isinstance(delay, (Constant, PointwiseQuadratic)) else "usdd"


def run_verify(cfg: RunConfig, log=print) -> list[tuple[str, bool, str]]:
    """Run the invariant suite for ``cfg``; returns ``(name, passed, detail)`` rows."""
    P = cfg.params
    delay = cfg.delay_spec()
    rows = []

    def record(name, ok, detail):
        rows.append((name, bool(ok), detail))
        log(f"{'PASS' if ok else 'FAIL'}  {name:<28} {detail}")

    eq = equilibrium(P)
    h2, h3 = h2_sides(P), h3_sides(P, eq.That)
    record("equilibrium H2", h2.holds, f"{h2.lhs:.6g} > {h2.rhs:.6g}")
    record("equilibrium H3", h3.holds, f"{h3.lhs:.6g} > {h3.rhs:.6g}")
    record("equilibrium residual", eq.residual < 1e-9, f"{eq.residual:.3e} < 1e-9")
    record("delay H1", check_H1(delay, h=P.h), type(delay).__name__)

    try:
        bounds = omega_c_bounds(P)
    except UnsupportedFamilyError as exc:
        record("invariant box", False, str(exc))
        return rows
    rng = np.random.default_rng(cfg.init.seed)
    T = rng.uniform(1e-3, bounds.Tmax, 1000)
    V = rng.uniform(1e-3, bounds.Vmax, 1000)
    lhs, rhs = identity_bd(T, V, P, eq)
    err = float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(lhs))))
    record("incidence identity", err < 1e-12, f"max rel {err:.2e} < 1e-12")
    states = np.column_stack([T, rng.uniform(1e-3, bounds.Tstarmax, 1000), V,
                              rng.uniform(1e-3, 10, 1000), rng.uniform(1e-3, 10, 1000)])
    delayed = np.column_stack([rng.uniform(1e-3, bounds.Tmax, 1000), np.ones(1000),
                               rng.uniform(1e-3, bounds.Vmax, 1000), np.ones(1000), np.ones(1000)])
    split = max(abs(a - b) / max(1.0, abs(a)) for a, b in
                (log_split_pair(s, d, P, eq) for s, d in zip(states, delayed)))
    record("log split identity", split < 1e-12, f"max rel {split:.2e} < 1e-12")

    t_end = cfg.sim.t_end if cfg.sim.t_end > 0 else 100.0
    sim = cfg.sim.replace(t_end=t_end)
    inv_ok, neg_ok, gw_ok = True, True, True
    worst_neg = 0.0
    for seed in range(cfg.init.seed, cfg.init.seed + cfg.verify.seeds):
        phi = sample_initial_in_omega_c(P, bounds, seed, cfg.init.lipschitz_cap)
        traj = integrate(P, delay, phi, sim)
        inv_ok &= bool(in_omega_c(traj, bounds, 1e-8))
        worst_neg = min(worst_neg, float(traj.y.min()))
        neg_ok &= worst_neg >= -1e-12
        gw_ok &= gronwall_check(traj.t, traj.y[:, 0], P.lam, P.d)
    record("forward invariance", inv_ok, f"{cfg.verify.seeds} seeds to t={t_end:g}, slack 1e-8")
    record("non-negativity", neg_ok, f"min {worst_neg:.3e} >= -1e-12")
    record("comparison lemma (T)", gw_ok, "T' <= lambda - d T envelope")

    phi = ConstantHistory(scaled_bounds_state(bounds, 2.0))
    pred = envelope_entry_time(P, phi, bounds, 1e-3)
    traj = integrate(P, delay, phi, sim.replace(t_end=1.2 * pred.time))
    t_abs = absorbing_time(traj, bounds, 1e-3)
    record("absorbing set", t_abs is not None and t_abs <= 1.1 * pred.time,
           f"entry {t_abs} <= 1.1 x {pred.time:.4g}")

    fn = _functional_for(delay)
    start = ConstantHistory(eq.as_array() + cfg.init.epsilon)
    traj = integrate(P, delay, start, sim)
    series = lyapunov_series(traj, P, eq, delay, fn, cfg.quad, t_from=2.0 * P.h)
    rise = float(np.max(np.diff(series.U)))
    record(f"{fn} non-increasing", is_nonincreasing(series.U, 1e-9), f"max rise {rise:.2e} <= 1e-9")
    res = float(series.residual()[1:-1].max())
    record(f"{fn} decomposition", res < 1e-6, f"max |dU_fd + D - S| {res:.2e} < 1e-6")

    traj = integrate(P, delay, start, SimConfig(dt=1e-3, t_end=5.0, stiff_cap=cfg.sim.stiff_cap))
    dev = oracle_integral_representation(traj, P, delay)
    record("integral representation", dev < 1e-4, f"max rel {dev:.2e} < 1e-4")
    return rows


def cmd_verify(args, cfg: RunConfig) -> int:
    rows = run_verify(cfg)
    failed = [r for r in rows if not r[1]]
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    return EXIT_OK if not failed else EXIT_FAIL


SWEEP_HEADER = ("value", "verdict", "max_dev")


def sweep_values(start: float, stop: float, steps: int) -> np.ndarray:
    if steps < 1:
        raise ConfigError("--sweep-steps must be >= 1")
    return np.linspace(start, stop, steps)


def _sweep_one(cfg: RunConfig, key: str, value: float, functional: str | None):
    run = with_override(cfg, key, float(value))
    P = run.params
    eq = equilibrium(P)
    delay = run.delay_spec()
    traj = integrate(P, delay, run.initial(), run.sim)
    fn = functional or _functional_for(delay)
    series = lyapunov_series(traj, P, eq, delay, fn, run.quad, t_from=2.0 * P.h)
    verdict = "decreasing" if is_nonincreasing(series.U, 1e-9) else "not_decreasing"
    dev = float(np.max(np.abs(traj.y[-1] - eq.as_array())))
    return float(value), verdict, dev


def run_sweep(cfg: RunConfig, key: str, start: float, stop: float, steps: int,
              functional: str | None = None, workers: int | None = None):
    """Rows ``(value, verdict, max_dev)`` in increasing order of ``value``.

    Runs are independent and fan out over a thread pool; results are
    collected in input order so the report is deterministic.
    """
    values = sweep_values(start, stop, steps)
    workers = workers or max(1, min(len(values), os.cpu_count() or 1))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda v: _sweep_one(cfg, key, v, functional), values))
    return sorted(rows, key=lambda r: r[0])


def cmd_sweep(args, cfg: RunConfig) -> int:
    if args.sweep_key is None or args.sweep_from is None or args.sweep_to is None:
        raise ConfigError("sweep needs --sweep-key, --sweep-from and --sweep-to")
    rows = run_sweep(cfg, args.sweep_key, args.sweep_from, args.sweep_to, args.sweep_steps,
                     args.functional)
    out, close = _open_out(_out_path(args, cfg))
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for value, verdict, dev in rows:
            w.writerow([format(value, ".17g"), verdict, format(dev, ".17g")])
    finally:
        if close:
            out.close()
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "equilibrium": cmd_equilibrium,
    "lyapunov": cmd_lyapunov,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="virsdd",
        description="Viral dynamics with state-dependent delay: simulation and verification.",
        epilog="configuration keys (section.key = value):\n" + describe_keys(),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", metavar="PATH", help="configuration file (default: built-in defaults)")
    parser.add_argument("--out", metavar="PATH", help="output file ('-' for stdout)")
    parser.add_argument("--seed", type=int, help="override init.seed")
    parser.add_argument("--t-end", type=float, dest="t_end", help="override sim.t_end")
    parser.add_argument("--dt", type=float, help="override sim.dt")
    parser.add_argument("--functional", choices=("u1", "usdd"), default=None,
                        help="Lyapunov functional (lyapunov: default u1; sweep: by delay family)")
    parser.add_argument("--sweep-key", metavar="KEY", help="dotted config key; delay.a sets a1 and a2")
    parser.add_argument("--sweep-from", type=float, metavar="A")
    parser.add_argument("--sweep-to", type=float, metavar="B")
    parser.add_argument("--sweep-steps", type=int, default=10, metavar="N")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "lyapunov" and args.functional is None:
        args.functional = "u1"
    try:
        try:
            cfg = _load(args)
        except DomainError as exc:
            raise ConfigError(f"invalid override: {exc}") from None
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VirSDDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
