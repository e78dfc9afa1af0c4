"""Head-to-head timing of the compiled and pure-numpy kernel backends.

Runs both implementations of the in-place Walsh butterfly and the XOR
autocorrelation on identical inputs, checks they agree, and prints a
speedup table. Invoke from the repository root:

    python3 benchmarks/compare_backends.py [--repeats 9] [--max-n 20]
"""

import argparse
import time

import numpy as np

from bindens.backend import (
    HAS_NUMBA,
    fwht_inplace_numba,
    fwht_inplace_numpy,
    xor_dot_numba,
    xor_dot_numpy,
)


def median_seconds(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def time_fwht(kernel, base, repeats):
    # each run gets a fresh copy so every pass transforms the same input
    copies = [base.copy() for _ in range(repeats)]
    it = iter(copies)
    med = median_seconds(lambda: kernel(next(it)), repeats)
    return med, copies[-1]


def row(label, numpy_s, numba_s):
    if numba_s is None:
        return f"{label:<28} {numpy_s * 1e3:>10.3f} {'-':>10} {'-':>8}"
    return (
        f"{label:<28} {numpy_s * 1e3:>10.3f} {numba_s * 1e3:>10.3f}"
        f" {numpy_s / numba_s:>7.1f}x"
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=9, help="timed runs per cell (median reported)")
    parser.add_argument("--max-n", type=int, default=20, help="largest transform dimension")
    args = parser.parse_args()

    rng = np.random.default_rng(7)
    print(f"numba available: {HAS_NUMBA}")
    print(f"{'kernel':<28} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")

    worst = 0.0
    for n in (10, 14, 18, 20):
        if n > args.max_n:
            break
        v = rng.uniform(-1.0, 1.0, size=1 << n)
        if HAS_NUMBA:
            fwht_inplace_numba(v[:2].copy())  # compile outside the timed region
        np_s, np_out = time_fwht(fwht_inplace_numpy, v, args.repeats)
        if HAS_NUMBA:
            nb_s, nb_out = time_fwht(fwht_inplace_numba, v, args.repeats)
            worst = max(worst, float(np.max(np.abs(np_out - nb_out))))
        else:
            nb_s = None
        print(row(f"fwht n={n}", np_s, nb_s))

    for n in (14, 18, 20):
        if n > args.max_n:
            break
        v = rng.uniform(-1.0, 1.0, size=1 << n)
        x = int(rng.integers(0, 1 << n))
        if HAS_NUMBA:
            xor_dot_numba(v[:2], 1)
        np_s = median_seconds(lambda: xor_dot_numpy(v, x), args.repeats)
        if HAS_NUMBA:
            nb_s = median_seconds(lambda: xor_dot_numba(v, x), args.repeats)
            worst = max(worst, abs(xor_dot_numpy(v, x) - xor_dot_numba(v, x)))
        else:
            nb_s = None
        print(row(f"xor_dot n={n}", np_s, nb_s))

    if HAS_NUMBA:
        print(f"max backend disagreement: {worst:.3g}")


if __name__ == "__main__":
    main()
