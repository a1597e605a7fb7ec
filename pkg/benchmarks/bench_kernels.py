"""Time the numba kernels against the pure-Python fallback.

Each variant runs in a fresh interpreter so the ``VIRSDD_DISABLE_JIT`` flag
takes effect at import. The jitted run is timed after a warm-up call, so
compilation is excluded.

    python3 benchmarks/bench_kernels.py [--t-end 20] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
import virsdd as v
from virsdd.history import Trajectory

t_end, repeat = float(sys.argv[1]), int(sys.argv[2])
P = v.P0
eq = v.equilibrium(P)
delay = v.PointwiseQuadratic(0.5, 0.01, 0.01, eq.That, eq.Vhat, 0.05)
phi = eq.as_array() * 1.01
cfg = v.SimConfig(dt=1e-2, t_end=t_end)
v.integrate(P, delay, phi, cfg.replace(t_end=0.1))  # warm-up / compile
best = float("inf")
for _ in range(repeat):
    t0 = time.perf_counter()
    traj = v.integrate(P, delay, phi, cfg)
    best = min(best, time.perf_counter() - t0)
times = np.linspace(0.0, t_end, 20001)
traj.eval_many(times)
best_eval = float("inf")
for _ in range(repeat):
    t0 = time.perf_counter()
    traj.eval_many(times)
    best_eval = min(best_eval, time.perf_counter() - t0)
print(json.dumps({"integrate_s": best, "eval_many_s": best_eval, "steps": traj.n_knots - 1,
                  "final": traj.y[-1].tolist()}))
"""


def run(disable: bool, t_end: float, repeat: int) -> dict:
    env = dict(os.environ, VIRSDD_DISABLE_JIT="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", WORKER, str(t_end), str(repeat)],
                         env=env, check=True, capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-end", type=float, default=20.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    jit = run(False, args.t_end, args.repeat)
    py = run(True, args.t_end, args.repeat)
    diff = max(abs(a - b) for a, b in zip(jit["final"], py["final"]))
    print(f"{'variant':<10} {'integrate [s]':>14} {'eval_many [s]':>14}   ({jit['steps']} steps)")
    print(f"{'numba':<10} {jit['integrate_s']:>14.4f} {jit['eval_many_s']:>14.5f}")
    print(f"{'python':<10} {py['integrate_s']:>14.4f} {py['eval_many_s']:>14.5f}")
    print(f"speed-up   {py['integrate_s'] / jit['integrate_s']:>14.1f} "
          f"{py['eval_many_s'] / jit['eval_many_s']:>14.1f}")
    print(f"max |final state difference| = {diff:.3e}")


if __name__ == "__main__":
    main()
