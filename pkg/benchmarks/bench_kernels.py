#!/usr/bin/env python3
"""Benchmark the compiled slot kernel against the pure-Python fallback.

Both backends consume identical random streams, so besides timing them this
also re-checks that their outputs are bit-identical.

    python benchmarks/bench_kernels.py [--horizon N] [--nodes N]
"""

import argparse
import time

import numpy as np

from csma_aoi.kernels import available_backends, get_kernel


def run(kernel, n, p, w0, horizon):
    start = time.perf_counter()
    raw = kernel.simulate_slots(n, p, w0, horizon, horizon // 100, 12345, 24)
    return raw, time.perf_counter() - start


def run_queue(kernel, horizon):
    start = time.perf_counter()
    raw = kernel.queue_sim(0.05, 0.2, horizon, 12345)
    return raw, time.perf_counter() - start


def same(a, b):
    return all(np.array_equal(a[k], b[k]) if isinstance(a[k], np.ndarray)
               else a[k] == b[k] for k in a)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--horizon", type=int, default=200_000,
                        help="slots per run (pure Python pays ~1 us/node-slot)")
    parser.add_argument("--nodes", type=int, default=20)
    parser.add_argument("--p", type=float, default=0.01)
    parser.add_argument("--w0", type=int, default=8)
    args = parser.parse_args()

    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"network kernel: N={args.nodes}, p={args.p}, w0={args.w0}, "
          f"horizon={args.horizon}")

    results = {}
    for name in backends:
        raw, elapsed = run(get_kernel(name), args.nodes, args.p, args.w0,
                           args.horizon)
        rate = args.horizon / elapsed
        results[name] = raw
        print(f"  {name:>6}: {elapsed:8.3f}s  ({rate:,.0f} slots/s, "
              f"{rate * args.nodes:,.0f} node-slots/s)")
    if len(results) == 2:
        ok = same(results["c"], results["python"])
        print(f"  outputs bit-identical: {ok}")
        if not ok:
            raise SystemExit("kernel parity violation")

    print(f"queue kernel: p=0.05, mu=0.2, horizon={args.horizon * 10}")
    q_results = {}
    for name in backends:
        raw, elapsed = run_queue(get_kernel(name), args.horizon * 10)
        q_results[name] = raw
        print(f"  {name:>6}: {elapsed:8.3f}s  "
              f"({args.horizon * 10 / elapsed:,.0f} slots/s)")
    if len(q_results) == 2:
        ok = q_results["c"] == q_results["python"]
        print(f"  outputs bit-identical: {ok}")
        if not ok:
            raise SystemExit("queue kernel parity violation")


if __name__ == "__main__":
    main()
