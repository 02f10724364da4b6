"""Compare the numba kernels against the pure-numpy fallback.

Two measurements:
  * per-call time of the rigid-body RK4 step and the slung-mass step,
    both implementations called directly in this process;
  * wall clock of a short closed-loop scenario, run in a subprocess with
    DNACLAB_NUMBA=1 and DNACLAB_NUMBA=0 so the backend switch is exercised
    end to end.

    python benchmarks/bench_kernels.py [--calls 20000] [--duration 10]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from dnaclab import kernels
from dnaclab.plant import QuadParams

SCENARIO = """
import time
from dnaclab import USE_NUMBA, load_scenario, run_scenario
cfg = load_scenario("exp1_circle", controller="pid+dnac", duration={duration})
run_scenario(cfg.with_overrides(duration=6.0))  # warm caches and JIT
t0 = time.perf_counter()
_, rep = run_scenario(cfg)
print(USE_NUMBA, time.perf_counter() - t0, repr(rep.attitude_l2_deg))
"""


def per_call(fn, args, calls):
    fn(*args)  # compile outside the timed region
    best = min(timeit.repeat(lambda: fn(*args), number=calls, repeat=3))
    return best / calls * 1e6


def kernel_table(calls):
    rng = np.random.default_rng(0)
    s = np.zeros(12)
    s[2] = 1.0
    s[6:12] = rng.normal(scale=0.1, size=6)
    cmd = np.array([11.8, 0.01, -0.02, 0.0])
    wrench = rng.normal(scale=0.1, size=6)
    prm = QuadParams().as_array()
    z = rng.normal(scale=0.1, size=8)
    slung = np.array([0.3, 9.81, 0.1, 9.0, 0.15, 1.0, 0.165, 0.125])
    rows = [
        ("rigid-body RK4", kernels.rb_rk4_loop, kernels.rb_rk4_numpy, (s, cmd, wrench, prm, 0.001)),
        ("slung-mass RK4", kernels.slung_step_loop, kernels.slung_step_numpy,
         (z, np.zeros(3), np.zeros(2), slung, 0.001)),
    ]
    print(f"{'kernel':<16}{'numba us':>12}{'numpy us':>12}{'speedup':>10}")
    for name, fast, slow, args in rows:
        a, b = per_call(fast, args, calls), per_call(slow, args, calls)
        print(f"{name:<16}{a:>12.2f}{b:>12.2f}{b / a:>9.1f}x")


def scenario_table(duration):
    print(f"\nclosed loop, exp1_circle pid+dnac, {duration:g} s simulated")
    results = {}
    for flag in ("1", "0"):
        env = dict(os.environ, DNACLAB_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", SCENARIO.format(duration=duration)],
                             env=env, capture_output=True, text=True, check=True).stdout.split()
        results[flag] = (float(out[1]), out[2])
        label = "numba" if out[0] == "True" else "numpy"
        print(f"  {label:<6} {float(out[1]):7.2f} s wall   attitude L2 {float(out[2]):.6f} deg")
    fast, slow = results["1"][0], results["0"][0]
    a, b = float(results["1"][1]), float(results["0"][1])
    # the two paths round differently, so metrics agree closely but not bitwise
    print(f"  speedup {slow / fast:.2f}x; attitude L2 relative difference {abs(a - b) / abs(b):.1e}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--calls", type=int, default=20_000)
    ap.add_argument("--duration", type=float, default=10.0)
    args = ap.parse_args(argv)
    if not kernels.USE_NUMBA:
        print("numba unavailable or disabled; the 'numba' column runs uncompiled loops")
    kernel_table(args.calls)
    scenario_table(args.duration)


if __name__ == "__main__":
    main()
