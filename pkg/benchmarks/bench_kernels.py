"""Compare the compiled and pure-Python Euler-Maruyama kernels.

Runs the same coupled integration with both backends, checks that the paths
agree bit for bit and reports the best wall-clock time of several repeats.

    python benchmarks/bench_kernels.py --steps 5000 --repeat 3
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from spectral_reg.ensembles import RngSpec
from spectral_reg.sde import _backend, couple_evolve


def best_time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--steps", type=int, default=5000)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    try:
        _backend.get("compiled")
    except ImportError:
        print("compiled kernel not built; only the Python kernel is available")
        return 1

    s2 = np.arange(args.n, 0, -1, dtype=float)
    s1 = 1e-3 * s2
    print(f"n={args.n} steps={args.steps} repeat={args.repeat}")
    print(f"{'variant':>8} {'python [s]':>11} {'compiled [s]':>13} {'speedup':>8}  identical")
    for variant in ("complex", "real"):
        runs = {}
        for backend in ("python", "compiled"):
            runs[backend] = best_time(
                lambda b=backend: couple_evolve(s1, s2, 0.5, args.steps, variant, RngSpec(args.seed),
                                                backend=b),
                args.repeat,
            )
        (tp, pp), (tc, pc) = runs["python"], runs["compiled"]
        same = np.array_equal(pp.paths, pc.paths, equal_nan=True) and pp.halvings == pc.halvings
        print(f"{variant:>8} {tp:11.4f} {tc:13.4f} {tp / tc:8.1f}  {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
