"""Time the numba and numpy Pauli kernels side by side.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The numba column excludes compilation (one warm-up call per kernel).
"""

import argparse
import timeit

import numpy as np

from kmsbound import kernels
from kmsbound.kernels import numpy_impl


def cases(rng):
    n_str = 200_000
    x1, z1, x2, z2 = (rng.integers(0, 1 << 10, size=n_str) for _ in range(4))
    n = 8
    table = np.full((n, n), -1, dtype=np.int64)
    for s in range(n):
        table[s, s:] = np.arange(n - s)
    g = rng.normal(size=(256, 256)) + 1j * rng.normal(size=(256, 256))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    var = rng.integers(-2, 5000, size=(1 << 7, 1 << 7))
    var[0, 0] = -1
    xs, zs = rng.integers(0, 1 << 10, size=64), rng.integers(0, 1 << 10, size=64)
    cs = rng.normal(size=64) + 0j
    return {
        "pauli_product (2e5 pairs)": lambda k: k.pauli_product(x1, z1, x2, z2),
        "canonical_keys (2e5 strings, 8 sites)": lambda k: k.canonical_keys(x1 & 255, z1 & 255, table, n),
        "pauli_expectations (8 qubits)": lambda k: k.pauli_expectations(rho),
        "pauli_sparse (64 strings, 10 qubits)": lambda k: k.pauli_sparse(xs, zs, cs, 10),
        "density_triplets (7 sites)": lambda k: k.density_triplets(7, var),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    impls = [("numpy", numpy_impl)]
    if kernels.numba_impl is not None:
        impls.append(("numba", kernels.numba_impl))
    print(f"{'kernel':40s}" + "".join(f"{name:>12s}" for name, _ in impls) + "     speedup")
    for label, fn in cases(rng).items():
        times = []
        for _, impl in impls:
            fn(impl)  # warm-up / compile
            times.append(min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat)))
        row = f"{label:40s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"   {times[0] / times[1]:8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
