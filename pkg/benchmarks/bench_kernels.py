"""Benchmark the numba kernels against their pure-numpy twins.

Runs each hot kernel on both backends and prints per-call wall times and
the numba speedup.  When numba is not importable the script still runs,
timing only the numpy column.

Usage:
    python3 benchmarks/bench_kernels.py [--samples 2000] [--repeat 5]
"""

import argparse
import math
import time

import numpy as np

from forrlab import _kernels


def best_of(repeat, fn, *args, **kwargs):
    """Best wall time over ``repeat`` calls, in seconds."""
    best = math.inf
    for _ in range(repeat):
        started = time.perf_counter()
        fn(*args, **kwargs)
        best = min(best, time.perf_counter() - started)
    return best


def bench_wht(args):
    rows = np.random.default_rng(args.seed).normal(size=(4096, 128))

    def run_numpy():
        _kernels.wht_batch_numpy(rows.copy())

    def run_numba():
        _kernels.wht_batch_numba(rows.copy())

    return "batched WHT 4096x128", run_numpy, run_numba


def bench_eval(args):
    rng = np.random.default_rng(args.seed)
    coeffs = rng.normal(size=2**10)
    points = rng.uniform(-0.5, 0.5, size=(args.samples, 10))

    def run_numpy():
        _kernels.eval_multilinear_batch_numpy(coeffs, points)

    def run_numba():
        _kernels.eval_multilinear_batch_numba(coeffs, points)

    return f"multilinear eval {args.samples}x2^10", run_numpy, run_numba


def bench_structured(args):
    n = 64
    epsilon = 1.0 / (8.0 * math.log(2 * n))
    dt = epsilon / 256

    def run_numpy():
        _kernels.run_paths_structured_numpy(
            args.seed, args.samples, n, dt, epsilon, store=False, want_phi=True
        )

    def run_numba():
        _kernels.run_paths_structured_numba(
            args.seed, args.samples, n, dt, epsilon, store=False, want_phi=True
        )

    return f"structured paths n=64, {args.samples} paths", run_numpy, run_numba


def bench_dense(args):
    dim = 4
    sigma = np.full((dim, dim), 0.2)
    np.fill_diagonal(sigma, 1.0)
    vals, vecs = np.linalg.eigh(sigma)
    sig_sqrt = (vecs * np.sqrt(vals)) @ vecs.T
    diag = np.ones(dim)
    epsilon = 1.0 / (8.0 * math.log(dim))
    dt = epsilon / 256

    def run_numpy():
        _kernels.run_paths_dense_numpy(
            args.seed, args.samples, sig_sqrt, diag, dt, epsilon, store=False
        )

    def run_numba():
        _kernels.run_paths_dense_numba(
            args.seed, args.samples, sig_sqrt, diag, dt, epsilon, store=False
        )

    return f"dense paths dim=4, {args.samples} paths", run_numpy, run_numba


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=2000, help="paths per sampling benchmark")
    parser.add_argument("--repeat", type=int, default=5, help="repetitions; best time wins")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print(f"numba available: {_kernels.NUMBA_AVAILABLE}, enabled: {_kernels.NUMBA_ENABLED}")
    benches = [bench_wht(args), bench_eval(args), bench_structured(args), bench_dense(args)]

    width = max(len(name) for name, _, _ in benches)
    header = f"{'kernel':<{width}}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, run_numpy, run_numba in benches:
        t_np = best_of(args.repeat, run_numpy)
        if _kernels.NUMBA_AVAILABLE:
            run_numba()  # JIT warmup outside the timed region
            t_nb = best_of(args.repeat, run_numba)
            print(f"{name:<{width}}  {t_np:>9.4f}s  {t_nb:>9.4f}s  {t_np / t_nb:>7.1f}x")
        else:
            print(f"{name:<{width}}  {t_np:>9.4f}s  {'n/a':>10}  {'n/a':>8}")


if __name__ == "__main__":
    main()
