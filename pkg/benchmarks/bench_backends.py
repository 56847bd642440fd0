#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the three hot paths on representative workloads:
- pulse propagation over a drift grid
- objective + exact gradient evaluation (the optimizer inner loop)
- sampled circuit evolution (the Monte Carlo estimator inner loop)

Run:  python benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import time

import numpy as np

from qpsynth._accel import NUMBA_ENABLED
from qpsynth._kernels import get_kernels


def timeit(fn, repeats):
    fn()  # warmup (includes JIT compilation for the numba path)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    n_steps = 32
    offsets = np.linspace(-2, 2, 7)
    h_re = rng.normal(size=n_steps)
    h_im = rng.normal(size=n_steps)
    dt = 0.1
    target = np.array(
        [[np.cos(np.pi / 4), -1j * np.sin(np.pi / 4)],
         [-1j * np.sin(np.pi / 4), np.cos(np.pi / 4)]],
        dtype=np.complex128,
    )

    shots = 100_000
    n_gates, dim = 8, 4
    ptms = np.stack([np.eye(dim) + 0.01 * rng.normal(size=(dim, dim)) for _ in range(n_gates)])
    idx = rng.integers(0, n_gates, size=shots).astype(np.int64)
    states = rng.normal(size=(shots, dim))

    backends = ["numpy"] + (["numba"] if NUMBA_ENABLED else [])
    if not NUMBA_ENABLED:
        print("numba unavailable; timing the numpy path only")

    workloads = {
        "propagate_total (7 offsets x 32 segments)": lambda k: k.propagate_total(
            h_re, h_im, offsets, dt
        ),
        "fidelity_grad  (7 offsets x 32 segments)": lambda k: k.fidelity_grad(
            h_re, h_im, offsets, dt, target
        ),
        f"evolve_sampled ({shots} shots, dim {dim})": lambda k: k.evolve_sampled(
            ptms, idx, states
        ),
    }

    results = {}
    for name in backends:
        kern = get_kernels(name)
        for label, work in workloads.items():
            results[(label, name)] = timeit(lambda: work(kern), args.repeats)

    width = max(len(label) for label, _ in results)
    print(f"{'workload':<{width}}  backend   mean time")
    for label in workloads:
        for name in backends:
            print(f"{label:<{width}}  {name:<8} {results[(label, name)] * 1e3:9.3f} ms")
        if len(backends) == 2:
            speedup = results[(label, "numpy")] / results[(label, "numba")]
            print(f"{'':<{width}}  speedup  {speedup:9.1f}x")

    # the two paths must agree numerically
    for label, work in workloads.items():
        outs = [work(get_kernels(name)) for name in backends]
        if len(outs) == 2:
            a, b = outs
            if isinstance(a, tuple):
                close = all(np.allclose(x, y, atol=1e-10) for x, y in zip(a, b))
            else:
                close = np.allclose(a, b, atol=1e-10)
            print(f"agreement [{label}]: {'ok' if close else 'MISMATCH'}")


if __name__ == "__main__":
    main()
