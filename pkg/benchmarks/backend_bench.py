"""Benchmark the numba-jitted kernels against the pure-numpy fallbacks.

Times each hot kernel at Monte Carlo working sizes, then an end-to-end
test pipeline and a small level experiment under each backend.  The active
backend is swapped by reassigning ``empbridge._kernels.active``, which the
library resolves at call time; a benchmark is the one place that hack is
warranted.

Usage:  python3 benchmarks/backend_bench.py [--n 1000] [--reps 200]
"""

import argparse
import time

import numpy as np

import empbridge._kernels as _kernels
from empbridge import Dataset, ModelSpec, monte_carlo_level, run_test


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_kernels(n, repeats=50):
    rng = np.random.default_rng(0)
    residuals = rng.standard_normal(n)
    x = np.ascontiguousarray(rng.standard_normal((n, 2)))
    spd = np.ascontiguousarray(x.T @ x + 2 * np.eye(2))
    rhs = rng.standard_normal(2)
    cases = {
        "partial_sums": lambda k: k.partial_sums(residuals),
        "bridge_nodes": lambda k: k.bridge_nodes(residuals, 1.0),
        "prefix_means": lambda k: k.prefix_means(x),
        "gram": lambda k: k.gram(x),
        "cholesky_2x2+solve": lambda k: k.solve_cholesky(k.cholesky_factor(spd)[0], rhs),
    }
    backends = {name: _kernels.get_kernels(name) for name in ("numpy", "numba")}
    for case_name, call in cases.items():
        for k in backends.values():
            call(k)  # warm the JIT cache before timing
        times = {name: _time(lambda k=k: call(k), repeats) for name, k in backends.items()}
        speedup = times["numpy"] / times["numba"]
        print(f"{case_name:<22} numpy {times['numpy'] * 1e6:9.1f} us   "
              f"numba {times['numba'] * 1e6:9.1f} us   x{speedup:.1f}")


def bench_end_to_end(n, reps):
    rng = np.random.default_rng(1)
    x = rng.random((n, 1))
    ds = Dataset(x=x, y=2.0 * x[:, 0] + rng.standard_normal(n), order_key=x[:, 0])
    spec = ModelSpec(kind="order-by-covariate", theta=(1.0, 1.0), intercept=True,
                     covariate_dist=("uniform", 0.0, 1.0))
    original = _kernels.active
    backends = {name: _kernels.get_kernels(name) for name in ("numpy", "numba")}
    try:
        for k in backends.values():  # warm JIT and allocator before timing
            _kernels.active = k
            run_test(ds, d=3, order_by="key")
            monte_carlo_level(spec, n=n, reps=5, d=3, alpha=0.05, seed=0)
        for name, k in backends.items():
            _kernels.active = k
            t_test = _time(lambda: run_test(ds, d=3, order_by="key"), 100)
            t_level = _time(
                lambda: monte_carlo_level(spec, n=n, reps=reps, d=3, alpha=0.05, seed=0), 3
            )
            print(f"{name:<8} run_test(n={n}) {t_test * 1e3:7.2f} ms   "
                  f"level({reps} reps) {t_level:6.2f} s")
    finally:
        _kernels.active = original


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=1000)
    parser.add_argument("--reps", type=int, default=200)
    args = parser.parse_args()
    print(f"kernel benchmarks at n={args.n}")
    bench_kernels(args.n)
    print()
    bench_end_to_end(args.n, args.reps)


if __name__ == "__main__":
    main()
