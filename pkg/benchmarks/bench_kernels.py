"""Time the numba and numpy Grover kernels on the same inputs.

    python3 benchmarks/bench_kernels.py --qubits 12 16 20 --iterations 8

The numba path is compiled once before timing. Both backends are checked to
agree to 1e-10 on every size before any timing is reported.
"""

import argparse
import time

import numpy as np

from gstateprep import kernels


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench(qubits, iterations, repeats, seed):
    rng = np.random.default_rng(seed)
    n = 1 << qubits
    amps0 = rng.normal(size=n) + 1j * rng.normal(size=n)
    amps0 /= np.linalg.norm(amps0)
    mask = rng.random(n) < 0.1

    ref = kernels.grover_iterate(amps0.copy(), mask, iterations, backend="numpy")
    rows = {}
    for backend in ("numpy", "numba"):
        if backend == "numba" and not kernels.HAS_NUMBA:
            continue
        out = kernels.grover_iterate(amps0.copy(), mask, iterations, backend=backend)
        err = float(np.abs(out - ref).max())
        if err > 1e-10:
            raise SystemExit(f"{backend} disagrees with numpy by {err:.3g} at {qubits} qubits")
        work = amps0.copy()
        rows[backend] = _time(lambda: kernels.grover_iterate(work, mask, iterations, backend=backend),
                              repeats)
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--qubits", type=int, nargs="+", default=[10, 14, 18, 20])
    parser.add_argument("--iterations", type=int, default=8)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print(f"{'qubits':>6} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for q in args.qubits:
        rows = bench(q, args.iterations, args.repeats, args.seed)
        npy = rows["numpy"] * 1e3
        nb = rows.get("numba")
        if nb is None:
            print(f"{q:>6} {npy:>10.3f} {'n/a':>10} {'n/a':>8}")
        else:
            print(f"{q:>6} {npy:>10.3f} {nb * 1e3:>10.3f} {rows['numpy'] / nb:>7.2f}x")


if __name__ == "__main__":
    main()
