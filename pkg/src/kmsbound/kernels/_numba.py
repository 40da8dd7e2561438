"""numba twins of the kernels in ``_numpy.py`` (same signatures, same output)."""

import numpy as np
from numba import njit


@njit(cache=True)
def _pc(v):
    c = 0
    while v:
        v &= v - 1
        c += 1
    return c


@njit(cache=True)
def _rev(v, n):
    out = 0
    for j in range(n):
        out |= ((v >> j) & 1) << (n - 1 - j)
    return out


@njit(cache=True)
def _i_pow(k):
    k = k % 4
    if k == 0:
        return 1.0 + 0.0j
    if k == 1:
        return 1.0j
    if k == 2:
        return -1.0 + 0.0j
    return -1.0j


@njit(cache=True)
def _popcount(v):
    out = np.empty(v.shape[0], dtype=np.int64)
    for t in range(v.shape[0]):
        out[t] = _pc(v[t])
    return out


def popcount(v):
    v = np.asarray(v, dtype=np.int64)
    return _popcount(np.ascontiguousarray(v).ravel()).reshape(v.shape)


@njit(cache=True)
def _bitrev(v, n):
    out = np.empty(v.shape[0], dtype=np.int64)
    for t in range(v.shape[0]):
        out[t] = _rev(v[t], n)
    return out


def bitrev(v, n):
    v = np.asarray(v, dtype=np.int64)
    return _bitrev(v.ravel(), n).reshape(v.shape)


@njit(cache=True)
def _pauli_product(x1, z1, x2, z2):
    m = x1.shape[0]
    xo = np.empty(m, dtype=np.int64)
    zo = np.empty(m, dtype=np.int64)
    ko = np.empty(m, dtype=np.int64)
    for t in range(m):
        a, b, c, d = x1[t], z1[t], x2[t], z2[t]
        y1 = a & b
        xo1 = a & ~b
        zo1 = b & ~a
        k = (
            _pc(y1 & d & ~c)
            - _pc(y1 & c & ~d)
            + _pc(xo1 & d & c)
            - _pc(xo1 & d & ~c)
            + _pc(zo1 & c & ~d)
            - _pc(zo1 & c & d)
        )
        xo[t] = a ^ c
        zo[t] = b ^ d
        ko[t] = k % 4
    return xo, zo, ko


def pauli_product(x1, z1, x2, z2):
    x1, z1, x2, z2 = np.broadcast_arrays(
        np.asarray(x1, dtype=np.int64),
        np.asarray(z1, dtype=np.int64),
        np.asarray(x2, dtype=np.int64),
        np.asarray(z2, dtype=np.int64),
    )
    shape = x1.shape
    xo, zo, ko = _pauli_product(
        np.ascontiguousarray(x1).ravel(),
        np.ascontiguousarray(z1).ravel(),
        np.ascontiguousarray(x2).ravel(),
        np.ascontiguousarray(z2).ravel(),
    )
    return xo.reshape(shape), zo.reshape(shape), ko.reshape(shape)


@njit(cache=True)
def _canonical_keys(x, z, table, frame_bits):
    n = table.shape[0]
    out = np.empty(x.shape[0], dtype=np.int64)
    for t in range(x.shape[0]):
        sup = x[t] | z[t]
        if sup == 0:
            out[t] = 0
            continue
        s = _pc((sup & -sup) - 1)
        kx = 0
        kz = 0
        for j in range(s, n):
            tb = table[s, j]
            if tb < 0:
                continue
            kx |= ((x[t] >> j) & 1) << tb
            kz |= ((z[t] >> j) & 1) << tb
        out[t] = (kx << frame_bits) | kz
    return out


def canonical_keys(x, z, table, frame_bits):
    x, z = np.broadcast_arrays(np.asarray(x, dtype=np.int64), np.asarray(z, dtype=np.int64))
    shape = x.shape
    out = _canonical_keys(
        np.ascontiguousarray(x).ravel(),
        np.ascontiguousarray(z).ravel(),
        np.ascontiguousarray(table, dtype=np.int64),
        frame_bits,
    )
    return out.reshape(shape)


@njit(cache=True)
def _pauli_expectations(rho, n):
    size = rho.shape[0]
    dense = np.empty((size, size), dtype=np.complex128)
    buf = np.empty(size, dtype=np.complex128)
    for xd in range(size):
        for b in range(size):
            buf[b] = rho[b, b ^ xd]
        h = 1
        while h < size:
            for start in range(0, size, 2 * h):
                for q in range(start, start + h):
                    u = buf[q]
                    v = buf[q + h]
                    buf[q] = u + v
                    buf[q + h] = u - v
            h *= 2
        for zd in range(size):
            dense[xd, zd] = _i_pow(_pc(xd & zd)) * buf[zd]
    out = np.empty((size, size), dtype=np.complex128)
    for xd in range(size):
        xr = _rev(xd, n)
        for zd in range(size):
            out[xr, _rev(zd, n)] = dense[xd, zd]
    return out


def pauli_expectations(rho):
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    n = rho.shape[0].bit_length() - 1
    return _pauli_expectations(rho, n)


@njit(cache=True)
def _pauli_sparse(xs, zs, coefs, n):
    size = 1 << n
    m = xs.shape[0]
    rows = np.empty(m * size, dtype=np.int64)
    cols = np.empty(m * size, dtype=np.int64)
    vals = np.empty(m * size, dtype=np.complex128)
    for k in range(m):
        xd = _rev(xs[k], n)
        zd = _rev(zs[k], n)
        c = coefs[k] * _i_pow(_pc(xs[k] & zs[k]))
        for b in range(size):
            t = k * size + b
            rows[t] = b ^ xd
            cols[t] = b
            vals[t] = -c if _pc(zd & b) & 1 else c
    return rows, cols, vals


def pauli_sparse(xs, zs, coefs, n):
    return _pauli_sparse(
        np.ascontiguousarray(xs, dtype=np.int64).ravel(),
        np.ascontiguousarray(zs, dtype=np.int64).ravel(),
        np.ascontiguousarray(coefs, dtype=np.complex128).ravel(),
        n,
    )


@njit(cache=True)
def _density_triplets(n, var_table):
    size = 1 << n
    total = 0
    for a in range(size):
        for b in range(a + 1):
            for zd in range(size):
                if var_table[_rev(a ^ b, n), _rev(zd, n)] != -2:
                    total += 1
    rows = np.empty(total, dtype=np.int64)
    cols = np.empty(total, dtype=np.int64)
    var = np.empty(total, dtype=np.int64)
    coef = np.empty(total, dtype=np.complex128)
    scale = 1.0 / size
    t = 0
    for a in range(size):
        for b in range(a + 1):
            xd = a ^ b
            xs = _rev(xd, n)
            for zd in range(size):
                v = var_table[xs, _rev(zd, n)]
                if v == -2:
                    continue
                c = _i_pow(_pc(xd & zd)) * scale
                if _pc(zd & b) & 1:
                    c = -c
                rows[t] = a
                cols[t] = b
                var[t] = v
                coef[t] = c
                t += 1
    return rows, cols, var, coef


def density_triplets(n, var_table):
    return _density_triplets(n, np.ascontiguousarray(var_table, dtype=np.int64))
