"""Time the kernel sweep and whole fits under the numba and numpy backends.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.
"""

import argparse
import time

import numpy as np

from logconcave import _accel, fit, jab_cells, prepare


def best_of(func, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        func()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    r = rng.uniform(-10, 10, 100_000)
    s = r + rng.normal(0, 1, r.size) * 10 ** rng.uniform(-8, 1, r.size)
    data = {m: prepare(rng.gumbel(size=m)) for m in (50, 200, 1000)}

    cases = [("jab_cells, 1e5 pairs", lambda: jab_cells(r, s))]
    cases += [(f"fit, m={m}", lambda d=d: fit(d)) for m, d in data.items()]

    backends = ["numba", "numpy"] if _accel.HAS_NUMBA else ["numpy"]
    results = {}
    for name in backends:
        _accel.USE_NUMBA = name == "numba"
        for label, func in cases:
            func()  # compile and warm caches
            results[label, name] = best_of(func, args.repeat)

    print(f"{'case':<24}" + "".join(f"{b:>12}" for b in backends) + ("    speed-up" if len(backends) == 2 else ""))
    for label, _ in cases:
        row = [results[label, b] for b in backends]
        line = f"{label:<24}" + "".join(f"{t * 1e3:>10.2f}ms" for t in row)
        if len(row) == 2:
            line += f"{row[1] / row[0]:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
