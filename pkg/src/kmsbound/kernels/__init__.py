"""Hot bit-level Pauli kernels.

The numba implementation is used when numba imports and the environment
variable ``KMSBOUND_KERNELS`` is not set to ``numpy``.  Both paths expose the
same functions and produce identical results; ``tests/test_kernels.py`` runs
them side by side and ``benchmarks/bench_kernels.py`` times them.
"""

import os

from . import _numpy as numpy_impl

numba_impl = None
if os.environ.get("KMSBOUND_KERNELS", "numba").lower() != "numpy":
    try:
        from . import _numba as numba_impl
    except ImportError:  # pragma: no cover - numba missing
        numba_impl = None

BACKEND = "numba" if numba_impl is not None else "numpy"
_impl = numba_impl if numba_impl is not None else numpy_impl

popcount = _impl.popcount
bitrev = _impl.bitrev
pauli_product = _impl.pauli_product
canonical_keys = _impl.canonical_keys
pauli_expectations = _impl.pauli_expectations
pauli_sparse = _impl.pauli_sparse
density_triplets = _impl.density_triplets

__all__ = [
    "BACKEND",
    "numpy_impl",
    "numba_impl",
    "popcount",
    "bitrev",
    "pauli_product",
    "canonical_keys",
    "pauli_expectations",
    "pauli_sparse",
    "density_triplets",
]
