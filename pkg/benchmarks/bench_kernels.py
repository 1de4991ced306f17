"""Compiled kernels vs the NumPy fallback.

Run with ``python benchmarks/bench_kernels.py``.  Each kernel is timed on
identical inputs under both backends and the outputs are compared.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from lorenzabc import _kernels_py as fallback

try:
    from lorenzabc import _kernels as compiled
except ImportError:
    compiled = None


def cases(rng):
    n = 10_000
    cuts = np.floor(n * np.linspace(0, 1, 11)[1:-1] + 1e-7).astype(np.int64)
    z = rng.beta(1.3, 1.0, n)
    x = np.sort(rng.gamma(2.0, size=n))
    m = 20_000
    bx, ba, bb = rng.random(m), rng.uniform(0.5, 5, m), rng.uniform(0.5, 5, m)
    N, d = 1000, 2
    new, prev = rng.gamma(3.0, size=(N, d)), rng.gamma(3.0, size=(N, d))
    log_v = np.log(np.full(N, 1.0 / N))
    h = np.array([0.2, 0.3])
    return {
        "gb_cut_shares (n=1e4, k=10)": ("gb_cut_shares", (z, 3.8, 1.0, 1.0, cuts)),
        "cut_shares (n=1e4, k=10)": ("cut_shares", (x, cuts)),
        "betainc_flat (2e4 points)": ("betainc_flat", (bx, ba, bb)),
        "log_mixture_density (N=1000, d=2)": ("log_mixture_density", (new, prev, log_v, h)),
    }


def bench(fn, args, repeat: int) -> float:
    number = max(1, int(0.2 / max(timeit.timeit(lambda: fn(*args), number=1), 1e-6)))
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<36}{'fallback':>12}{'compiled':>12}{'speedup':>9}  max |diff|")
    for label, (name, a) in cases(rng).items():
        tf = bench(getattr(fallback, name), a, args.repeat)
        ref = np.asarray(getattr(fallback, name)(*a))
        if compiled is None:
            print(f"{label:<36}{tf * 1e3:>10.3f}ms{'n/a':>12}")
            continue
        tc = bench(getattr(compiled, name), a, args.repeat)
        diff = float(np.max(np.abs(np.asarray(getattr(compiled, name)(*a)) - ref)))
        print(f"{label:<36}{tf * 1e3:>10.3f}ms{tc * 1e3:>10.3f}ms{tf / tc:>8.2f}x  {diff:.1e}")


if __name__ == "__main__":
    main()
