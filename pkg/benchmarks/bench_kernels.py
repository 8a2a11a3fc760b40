"""Benchmark the numpy and numba kernel backends against each other.

Runs each kernel at a small (acceptance-suite) size and an inflated size,
so the crossover is visible: the jitted loops win once the orbit tables
stop fitting in cache, while at desk scale the numpy path is already
fast and free of compile latency.

Usage:
    python benchmarks/bench_kernels.py [--runs 20]
"""

import argparse
import time

import numpy as np

from superstab import kernels


def make_inputs(rows, m, seed=0):
    rng = np.random.default_rng(seed)
    O = rng.normal(0.0, 10.0, size=(rows, m))
    P = 1.0 + np.abs(rng.normal(0.0, 1.0, size=(rows - 1, m)))
    P = np.minimum.accumulate(P, axis=0)
    pairs = rng.normal(0.0, 3.0, size=(4, rows * m))
    return O, P, pairs


def bench(fn, args, runs):
    times = []
    for _ in range(runs):
        start = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - start)
    return np.array(times)


CASES = [
    ("orbit_iterates", lambda O, P, pairs, g: (O, g)),
    ("successive_defect_sups", lambda O, P, pairs, g: (O, P, g, 0.0)),
    ("partial_bound_tables", lambda O, P, pairs, g: (O[:21], P[:20], g)),
    ("hypothesis_violations", lambda O, P, pairs, g: (pairs[0], pairs[1], pairs[2], np.abs(pairs[3]))),
    ("linear_residuals", lambda O, P, pairs, g: (pairs[0], pairs[1], pairs[2])),
]


def run_suite(rows, m, runs):
    print(f"\norbit table {rows} x {m}  ({runs} runs, best-of mean ms)")
    print(f"{'kernel':28s} {'numpy':>10s} {'numba':>10s} {'speedup':>9s}")
    O, P, pairs = make_inputs(rows, m)
    g = 2.0
    backends = {name: kernels.backend_functions(name) for name in kernels.available_backends()}
    for name, build in CASES:
        args = build(O, P, pairs, g)
        row = {}
        for backend, fns in backends.items():
            fns[name](*args)  # warmup / compile
            row[backend] = bench(fns[name], args, runs).mean() * 1e3
        if "numba" in row:
            speed = row["numpy"] / row["numba"]
            print(f"{name:28s} {row['numpy']:10.3f} {row['numba']:10.3f} {speed:8.1f}x")
        else:
            print(f"{name:28s} {row['numpy']:10.3f} {'-':>10s} {'-':>9s}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--runs", type=int, default=20)
    args = parser.parse_args()
    if "numba" not in kernels.available_backends():
        print("numba not installed: benchmarking the numpy path only")
    run_suite(rows=61, m=600, runs=args.runs)       # acceptance-suite scale
    run_suite(rows=61, m=200_000, runs=max(3, args.runs // 4))  # inflated scale


if __name__ == "__main__":
    main()
