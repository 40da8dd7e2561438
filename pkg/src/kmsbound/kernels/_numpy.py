"""Pure-numpy implementations of the bit-level Pauli kernels.

Conventions shared with the numba twin in ``_numba.py``:

* A Pauli string on an ordered window of ``n`` sites is a pair of integers
  ``(x, z)``; bit ``j`` of each refers to window site ``j``.  The Hermitian
  string is ``P(x, z) = i**popcount(x & z) * X**x Z**z`` so that a site with
  both bits set carries ``Y``.
* Dense matrices use Kronecker order with window site 0 most significant, so
  site ``j`` lives on bit ``n - 1 - j`` of a computational-basis index.
"""

import numpy as np

_I_POW = np.array([1.0, 1.0j, -1.0, -1.0j])


def popcount(v):
    return np.bitwise_count(np.asarray(v, dtype=np.int64)).astype(np.int64)


def bitrev(v, n):
    v = np.asarray(v, dtype=np.int64)
    out = np.zeros_like(v)
    for j in range(n):
        out |= ((v >> j) & 1) << (n - 1 - j)
    return out


def pauli_product(x1, z1, x2, z2):
    """Multiply Hermitian Pauli strings elementwise.

    Returns ``(x, z, k)`` with ``P(x1, z1) P(x2, z2) = i**k P(x, z)``.
    """
    x1 = np.asarray(x1, dtype=np.int64)
    z1 = np.asarray(z1, dtype=np.int64)
    x2 = np.asarray(x2, dtype=np.int64)
    z2 = np.asarray(z2, dtype=np.int64)
    y1 = x1 & z1
    xo1 = x1 & ~z1
    zo1 = z1 & ~x1
    k = (
        popcount(y1 & z2 & ~x2)
        - popcount(y1 & x2 & ~z2)
        + popcount(xo1 & z2 & x2)
        - popcount(xo1 & z2 & ~x2)
        + popcount(zo1 & x2 & ~z2)
        - popcount(zo1 & x2 & z2)
    )
    return x1 ^ x2, z1 ^ z2, np.mod(k, 4)


def canonical_keys(x, z, table, frame_bits):
    """Translation-canonical integer key for each string.

    ``table[s, j]`` is the frame bit of window site ``j`` once the string is
    translated so that its lexicographically least site ``s`` sits at the
    frame origin.  The identity maps to key 0.
    """
    x = np.asarray(x, dtype=np.int64)
    z = np.asarray(z, dtype=np.int64)
    n = table.shape[0]
    sup = x | z
    low = popcount((sup & -sup) - 1)
    kx = np.zeros_like(x)
    kz = np.zeros_like(z)
    for s in range(n):
        sel = (low == s) & (sup != 0)
        if not sel.any():
            continue
        xs = x[sel]
        zs = z[sel]
        ax = np.zeros_like(xs)
        az = np.zeros_like(zs)
        for j in range(s, n):
            t = table[s, j]
            if t < 0:
                continue
            ax |= ((xs >> j) & 1) << t
            az |= ((zs >> j) & 1) << t
        kx[sel] = ax
        kz[sel] = az
    return (kx << frame_bits) | kz


def _wht_rows(v):
    # in-place-style Walsh-Hadamard transform along axis 1
    rows, size = v.shape
    h = 1
    while h < size:
        v = v.reshape(rows, size // (2 * h), 2, h)
        a = v[:, :, 0, :]
        b = v[:, :, 1, :]
        v = np.stack((a + b, a - b), axis=2).reshape(rows, size)
        h *= 2
    return v


def pauli_expectations(rho):
    """``E[x, z] = tr(rho P(x, z))`` for every Pauli string of the window."""
    rho = np.asarray(rho, dtype=np.complex128)
    size = rho.shape[0]
    n = size.bit_length() - 1
    b = np.arange(size, dtype=np.int64)
    xd = b[:, None]
    v = rho[b[None, :], b[None, :] ^ xd]
    s = _wht_rows(v)
    phase = _I_POW[popcount(xd & b[None, :]) % 4]
    dense = phase * s
    rev = bitrev(b, n)
    return dense[np.ix_(rev, rev)]


def pauli_sparse(xs, zs, coefs, n):
    """COO triplets of ``sum_k coefs[k] P(xs[k], zs[k])`` (duplicates not summed)."""
    xs = np.asarray(xs, dtype=np.int64)
    zs = np.asarray(zs, dtype=np.int64)
    coefs = np.asarray(coefs, dtype=np.complex128)
    size = 1 << n
    b = np.arange(size, dtype=np.int64)
    xd = bitrev(xs, n)[:, None]
    zd = bitrev(zs, n)[:, None]
    rows = b[None, :] ^ xd
    cols = np.broadcast_to(b[None, :], rows.shape)
    sign = 1.0 - 2.0 * (popcount(zd & b[None, :]) & 1)
    vals = (coefs * _I_POW[popcount(xs & zs) % 4])[:, None] * sign
    return rows.ravel(), cols.ravel(), vals.ravel()


def density_triplets(n, var_table):
    """Lower-triangle entries of ``rho = 2**-n sum_P w(P) P`` on ``n`` sites.

    ``var_table[x, z]`` holds the variable id of ``P(x, z)`` (site bit
    convention), ``-1`` for the constant one and ``-2`` for a structurally
    zero moment (skipped).  Returns ``rows, cols, vars, coefs``.
    """
    size = 1 << n
    a, b = np.tril_indices(size)
    a = a.astype(np.int64)
    b = b.astype(np.int64)
    zd = np.arange(size, dtype=np.int64)
    xd = (a ^ b)[:, None]
    rev = bitrev(zd, n)
    x_site = rev[xd]
    z_site = rev[zd][None, :]
    var = var_table[x_site, z_site]
    phase = _I_POW[popcount(xd & zd[None, :]) % 4]
    sign = 1.0 - 2.0 * (popcount(zd[None, :] & b[:, None]) & 1)
    coef = phase * sign / size
    rows = np.broadcast_to(a[:, None], var.shape)
    cols = np.broadcast_to(b[:, None], var.shape)
    keep = var != -2
    return rows[keep], cols[keep], var[keep], coef[keep]
