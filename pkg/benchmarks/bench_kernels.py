"""Timing of the float64 offset kernels: numba against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--steps N] [--points M]``.
Set BICRITICAL_DISABLE_NUMBA=1 to time the fallback alone.
"""

import argparse
import time

import numpy as np

from bicritical import kernels, maps


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=987, help="number of composed steps (orbit length)")
    parser.add_argument("--points", type=int, default=256, help="offsets pushed at once")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args(argv)

    f = maps.tune_golden_trig("0.2", 16, b="0.3")
    orbit = maps.orbits_of(f)[0]
    s0, s1 = f.step_params(orbit.segment(0, args.steps))
    t = np.linspace(-1e-6, 1e-6, args.points)
    call = dict(alpha=float(f._alpha), b=float(f.b))
    K = float(f.K)

    print(f"backend: {kernels.backend()}  steps={args.steps}  points={args.points}")
    print(f"{'order':>5} {'numpy [s]':>11} {'numba [s]':>11} {'speedup':>8} {'rel diff':>10}")
    for order in (0, 1, 3):
        slow = best_of(lambda: kernels.trig_push(s0, s1, K, t, order, use_numba=False, **call), args.repeats)
        ref = kernels.trig_push(s0, s1, K, t, order, use_numba=False, **call)
        if kernels.backend() == "numba":
            kernels.trig_push(s0, s1, K, t, order, use_numba=True, **call)  # compile outside the timing
            fast = best_of(lambda: kernels.trig_push(s0, s1, K, t, order, use_numba=True, **call), args.repeats)
            out = kernels.trig_push(s0, s1, K, t, order, use_numba=True, **call)
            diff = float(np.max(np.abs(out - ref) / np.maximum(np.abs(ref).max(axis=0), 1e-300)))
            print(f"{order:>5} {slow:>11.4f} {fast:>11.4f} {slow / fast:>8.1f} {diff:>10.1e}")
        else:
            print(f"{order:>5} {slow:>11.4f} {'-':>11} {'-':>8} {'-':>10}")


if __name__ == "__main__":
    main()
