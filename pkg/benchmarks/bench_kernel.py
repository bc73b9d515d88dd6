"""Throughput of the compiled and pure-Python step kernels on the same increments.

Usage: python3 benchmarks/bench_kernel.py [--steps N] [--d D]
"""

import argparse
import time

import numpy as np

from srbm.model import TandemSpec, build_tandem
from srbm.simulator.backend import available, get_kernel
from srbm.simulator.lcp import max_pivots


def run(kernel, data, inc):
    w = np.zeros(data.d)
    w_out = np.empty_like(inc)
    dy_out = np.empty_like(inc)
    r = np.ascontiguousarray(data.r)
    start = time.perf_counter()
    status, _ = kernel.reflect_chunk(w, inc, r, w_out, dy_out, max_pivots(data.d))
    elapsed = time.perf_counter() - start
    assert status == 0
    return elapsed, w_out, dy_out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--steps", type=int, default=200_000)
    parser.add_argument("--d", type=int, default=3)
    args = parser.parse_args()
    d = args.d
    spec = TandemSpec(d, tuple(1.0 + 0.5 * i for i in range(d + 1)), (1.0,) * (d + 1))
    data = build_tandem(spec)
    dt = 0.01
    rng = np.random.default_rng(0)
    inc = rng.standard_normal((args.steps, d)) @ (np.sqrt(dt) * np.linalg.cholesky(data.sigma).T) + data.mu * dt
    results = {}
    for name in available():
        elapsed, w_out, dy_out = run(get_kernel(name), data, inc)
        results[name] = (w_out, dy_out)
        print(f"{name:>7}: {elapsed:8.3f} s  {args.steps / elapsed:12.0f} steps/s")
    if len(results) == 2:
        (wa, ya), (wb, yb) = results.values()
        print(f"max |state difference| = {np.max(np.abs(wa - wb)):.3g}, max |push difference| = {np.max(np.abs(ya - yb)):.3g}")


if __name__ == "__main__":
    main()
