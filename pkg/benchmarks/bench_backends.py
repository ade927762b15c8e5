"""Time the numba kernels against the pure-numpy fallbacks.

Run:  python benchmarks/bench_backends.py [--repeat N]

Workloads mirror the hot paths: the latent-class assignment sweep, missing
cell redraw, count accumulation, the tree split scan, and row routing.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from catmi.kernels import available_backends


def _dpm_workload(rng, n=10_000, p=20, k=35, d=6):
    logpi = np.log(rng.dirichlet(np.ones(k)))
    lam = rng.dirichlet(np.ones(d), size=(k, p))
    codes = rng.integers(0, d, size=(n, p)).astype(np.int32)
    missing = rng.random((n, p)) < 0.3
    n_levels = np.full(p, d, dtype=np.int64)
    return logpi, lam, codes, missing, n_levels


def _split_workload(rng, n=10_000, q=8):
    n_levels = rng.integers(2, 12, size=q).astype(np.int64)
    x = np.stack([rng.integers(0, lev, size=n) for lev in n_levels],
                 axis=1).astype(np.int32)
    y = rng.integers(0, 4, size=n).astype(np.int32)
    return x, y, n_levels


def build_cases(rng):
    logpi, lam, codes, missing, n_levels = _dpm_workload(rng)
    loglam = np.log(lam)
    u_assign = rng.random(len(codes))
    z = rng.integers(0, lam.shape[0], size=len(codes)).astype(np.int32)
    u_draw = rng.random(int(missing.sum()))
    xs, ys, split_levels = _split_workload(rng)

    def case_assign(impl):
        impl.assign_classes(logpi, loglam, codes, missing, u_assign)

    def case_draw(impl):
        work = codes.copy()
        impl.draw_missing(lam, z, work, missing, n_levels, u_draw)

    def case_counts(impl):
        impl.class_level_counts(codes, z, lam.shape[0], n_levels)

    def case_split(impl):
        impl.best_split(xs, ys, split_levels, 4, 4, 12)

    return [
        ("assign_classes n=10k K=35 p=20", case_assign),
        ("draw_missing   n=10k 30% miss", case_draw),
        ("level_counts   n=10k K=35", case_counts),
        ("best_split     n=10k q=8", case_split),
    ]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()

    backends = available_backends()
    rng = np.random.default_rng(0)
    cases = build_cases(rng)

    # warm up (jit compilation and cache loads)
    for impl in backends.values():
        for _name, fn in cases:
            fn(impl)

    print(f"{'kernel':32}" + "".join(f"{b:>12}" for b in backends)
          + ("     speedup" if len(backends) > 1 else ""))
    for name, fn in cases:
        times = {}
        for backend, impl in backends.items():
            best = min(
                _timed(fn, impl) for _ in range(args.repeat)
            )
            times[backend] = best
        row = f"{name:32}" + "".join(f"{times[b]*1e3:>10.3f}ms" for b in backends)
        if "numba" in times and "numpy" in times:
            row += f"{times['numpy'] / times['numba']:>11.1f}x"
        print(row)


def _timed(fn, impl) -> float:
    t0 = time.perf_counter()
    fn(impl)
    return time.perf_counter() - t0


if __name__ == "__main__":
    main()
