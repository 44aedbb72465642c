#!/usr/bin/env python3
"""Benchmark the Polya-Gamma PG(1, c) backends: compiled kernel vs numpy.

The two PG draws per individual per sweep are the hot inner loop of the
Gibbs sampler, so this is the number that decides study runtimes.

    python benchmarks/bench_pg.py [--sizes 1000,100000] [--repeats 5]
"""

import argparse
import time

import numpy as np

from crxo_sace.pg import available_backends, sample_pg1
from crxo_sace.rng import RngStream


def bench(backend: str, c_value: float, size: int, repeats: int) -> float:
    rng = RngStream(17, 0).generator()
    c = np.full(size, c_value)
    sample_pg1(c[: min(size, 1000)], rng, backend=backend)  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        sample_pg1(c, rng, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="1000,10000,100000,1000000")
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--tilts", default="0.0,1.0,4.0")
    args = parser.parse_args()

    sizes = [int(s) for s in args.sizes.split(",")]
    tilts = [float(t) for t in args.tilts.split(",")]
    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    header = f"{'tilt':>6} {'size':>9}" + "".join(f"  {b:>14}" for b in backends)
    if len(backends) == 2:
        header += f"  {'speedup':>8}"
    print(header)
    for c in tilts:
        for size in sizes:
            times = {b: bench(b, c, size, args.repeats) for b in backends}
            row = f"{c:6.1f} {size:9d}"
            for b in backends:
                rate = size / times[b] / 1e6
                row += f"  {rate:8.2f} Mdr/s"
            if len(backends) == 2:
                row += f"  {times['numpy'] / times['cython']:7.1f}x"
            print(row)


if __name__ == "__main__":
    main()
