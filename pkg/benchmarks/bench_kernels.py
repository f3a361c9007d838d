#!/usr/bin/env python3
"""
Compiled kernels vs the plain-Python fallback.

Each mode runs in its own interpreter because the JIT switch
(MAXDDE_DISABLE_JIT) is read once at import time.

    python3 benchmarks/bench_kernels.py [--steps-per-window 2000] [--span 40]
"""
import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
from maxdde import USING_JIT, integrate, preset
from maxdde.return_map import eval_R

n, span = int(sys.argv[1]), float(sys.argv[2])
prob = preset("ex2")
dt = prob.params.h / n
integrate(prob, 1.5, 1.0, dt)  # compile (or warm caches) outside the timing

t0 = time.perf_counter()
traj = integrate(prob, 1.5, span, dt)
t_int = time.perf_counter() - t0

t0 = time.perf_counter()
R = eval_R(prob, 0.0, dt=dt).R
t_map = time.perf_counter() - t0

print(json.dumps({"jit": USING_JIT, "integrate_s": t_int, "eval_R_s": t_map,
                  "steps": int(traj.values.size - traj.n_hist), "R0": R,
                  "last": float(traj.values[-1])}))
"""


def run(disable, n, span):
    env = dict(os.environ, MAXDDE_DISABLE_JIT="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", CHILD, str(n), str(span)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    ap.add_argument("--steps-per-window", type=int, default=2000)
    ap.add_argument("--span", type=float, default=40.0)
    args = ap.parse_args()

    jit = run(False, args.steps_per_window, args.span)
    pure = run(True, args.steps_per_window, args.span)
    if not jit["jit"]:
        print("warning: numba unavailable, both runs use the fallback")

    print(f"ex2, dt = h/{args.steps_per_window}, {jit['steps']} steps")
    print(f"{'task':>10}  {'numba (s)':>10}  {'python (s)':>10}  {'speedup':>8}")
    print("-" * 46)
    for key, name in (("integrate_s", "integrate"), ("eval_R_s", "eval_R")):
        print(f"{name:>10}  {jit[key]:>10.4f}  {pure[key]:>10.4f}  {pure[key] / jit[key]:>7.1f}x")
    same = abs(jit["R0"] - pure["R0"]) < 1e-12 and abs(jit["last"] - pure["last"]) < 1e-12
    print(f"results agree: {'yes' if same else 'NO'} (R(0) = {jit['R0']:.12g})")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
