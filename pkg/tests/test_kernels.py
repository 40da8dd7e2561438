"""numba and numpy kernels agree with each other and with dense brute force."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kmsbound import kernels
from kmsbound.kernels import numpy_impl

PAULI = {
    (0, 0): np.eye(2),
    (1, 0): np.array([[0, 1], [1, 0]]),
    (0, 1): np.diag([1, -1]),
    (1, 1): np.array([[0, -1j], [1j, 0]]),
}

impls = [numpy_impl] + ([kernels.numba_impl] if kernels.numba_impl is not None else [])
impl_ids = [m.__name__.rsplit(".", 1)[-1] for m in impls]


def dense_pauli(x, z, n):
    """Kronecker product, site 0 most significant; bit j of x/z is site j."""
    out = np.eye(1)
    for j in range(n):
        out = np.kron(out, PAULI[((x >> j) & 1, (z >> j) & 1)])
    return out


def test_numba_backend_selected_by_default():
    # the test environment has numba; KMSBOUND_KERNELS=numpy switches it off
    import os

    if os.environ.get("KMSBOUND_KERNELS", "").lower() == "numpy":
        assert kernels.BACKEND == "numpy"
    else:
        assert kernels.BACKEND == "numba"


@pytest.mark.parametrize("impl", impls, ids=impl_ids)
def test_popcount_and_bitrev(impl):
    v = np.arange(1 << 10, dtype=np.int64)
    assert np.array_equal(impl.popcount(v), [bin(int(a)).count("1") for a in v])
    r = impl.bitrev(v, 10)
    assert np.array_equal(r, [int(format(int(a), "010b")[::-1], 2) for a in v])
    assert np.array_equal(impl.popcount(v.reshape(32, 32)).ravel(), impl.popcount(v))


@pytest.mark.parametrize("impl", impls, ids=impl_ids)
@given(n=st.integers(1, 4), data=st.data())
def test_pauli_product_matches_dense(impl, n, data):
    top = (1 << n) - 1
    x1, z1, x2, z2 = (data.draw(st.integers(0, top)) for _ in range(4))
    x, z, k = impl.pauli_product(np.array([x1]), np.array([z1]), np.array([x2]), np.array([z2]))
    lhs = dense_pauli(x1, z1, n) @ dense_pauli(x2, z2, n)
    rhs = (1j ** int(k[0])) * dense_pauli(int(x[0]), int(z[0]), n)
    assert np.allclose(lhs, rhs)


@pytest.mark.parametrize("impl", impls, ids=impl_ids)
@given(n=st.integers(1, 4), seed=st.integers(0, 2**31))
def test_pauli_expectations_match_traces(impl, n, seed):
    rng = np.random.default_rng(seed)
    d = 1 << n
    rho = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    E = impl.pauli_expectations(rho)
    for x in range(d):
        for z in range(d):
            assert E[x, z] == pytest.approx(np.trace(rho @ dense_pauli(x, z, n)), abs=1e-10)


@pytest.mark.parametrize("impl", impls, ids=impl_ids)
def test_pauli_sparse_matches_dense(impl, rng):
    n = 3
    xs = rng.integers(0, 8, size=5)
    zs = rng.integers(0, 8, size=5)
    cs = rng.normal(size=5) + 1j * rng.normal(size=5)
    r, c, v = impl.pauli_sparse(xs, zs, cs, n)
    m = np.zeros((8, 8), complex)
    np.add.at(m, (r, c), v)
    ref = sum(cc * dense_pauli(int(x), int(z), n) for x, z, cc in zip(xs, zs, cs))
    assert np.allclose(m, ref)


def test_kernels_agree_on_canonical_keys_and_density(rng):
    if kernels.numba_impl is None:
        pytest.skip("numba unavailable")
    nb, npy = kernels.numba_impl, numpy_impl
    n = 4
    table = np.full((n, n), -1, dtype=np.int64)
    for s in range(n):
        for j in range(s, n):
            table[s, j] = j - s
    x = rng.integers(0, 16, size=500)
    z = rng.integers(0, 16, size=500)
    assert np.array_equal(nb.canonical_keys(x, z, table, n), npy.canonical_keys(x, z, table, n))
    var = rng.integers(-2, 30, size=(16, 16))
    var[0, 0] = -1
    for a, b in zip(nb.density_triplets(n, var), npy.density_triplets(n, var)):
        assert np.allclose(a, b)


def test_canonical_keys_translation_invariant():
    # strings that differ by a shift inside the window share a key
    n = 4
    table = np.full((n, n), -1, dtype=np.int64)
    for s in range(n):
        for j in range(s, n):
            table[s, j] = j - s
    # Z on site 0 and X on site 1, versus the same pattern on sites 2, 3
    a = kernels.canonical_keys(np.array([0b0010, 0b1000]), np.array([0b0001, 0b0100]), table, n)
    assert a[0] == a[1]
    b = kernels.canonical_keys(np.array([0b0001]), np.array([0b0010]), table, n)
    assert b[0] != a[0]


def test_density_triplets_reconstruct_state(rng):
    from conftest import random_density

    n = 2
    rho = random_density(rng, n)
    E = kernels.pauli_expectations(rho)
    size = 1 << n
    var = np.arange(size * size).reshape(size, size) - 1  # identity -> -1
    r, c, v, coef = kernels.density_triplets(n, var)
    vals = np.concatenate([[1.0 + 0j], E.ravel()[1:]])
    m = np.zeros((size, size), complex)
    np.add.at(m, (r, c), coef * np.where(v >= 0, vals[np.maximum(v, 0) + 1], 1.0))
    low = np.tril(rho)
    assert np.allclose(m, low)
