"""Operator relative entropy and its semidefinite under-approximations.

``D_op(A||B) = A^1/2 log(A^1/2 B^-1 A^1/2) A^1/2``.

The level-``m`` approximation replaces ``log`` by ``h_m(x) = 2^m (x^(2^-m) - 1)``
inside the operator perspective::

    D^[m](X||Y) = -P_{h_m}(X, Y) = 2^m (X - X #_{2^-m} Y)

where ``X #_t Y = X^1/2 (X^-1/2 Y X^-1/2)^t X^1/2`` is the weighted geometric
mean.  Because ``log <= h_m`` pointwise and ``h_m`` decreases in ``m``,
``D^[0] <= D^[1] <= ... <= D_op`` in Loewner order.  So ``D^[m](X||Y) <= T`` is
implied by ``D_op(X||Y) <= T``, which is what keeps relaxed bounds valid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .moments import AffineMatrix


class DopSupportError(ValueError):
    """``image(A)`` is not contained in ``image(B)``."""

    def __init__(self, msg: str, vector: np.ndarray):
        super().__init__(msg)
        self.vector = vector


@dataclass(frozen=True)
class DopConfig:
    m: int = 3
    eig_floor: float = 1e-12

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("m must be nonnegative")


def _herm(a):
    a = np.asarray(a, dtype=np.complex128)
    return (a + a.conj().T) / 2


def _maybe_real(out, *inputs):
    if all(np.isrealobj(x) for x in inputs):
        return out.real
    return out


def dop_exact(A, B, eig_floor: float = 1e-12) -> np.ndarray:
    """Exact ``D_op(A||B)`` via eigendecompositions on the common support."""
    A0, B0 = A, B
    A = _herm(A)
    B = _herm(B)
    if A.shape != B.shape:
        raise ValueError("A and B must have equal shapes")
    scale = max(np.abs(A).max(initial=0.0), np.abs(B).max(initial=0.0), 1e-300)
    wb, vb = np.linalg.eigh(B)
    if wb.min(initial=0.0) < -eig_floor * scale or np.linalg.eigvalsh(A).min(initial=0.0) < -eig_floor * scale:
        raise ValueError("A and B must be positive semidefinite")
    sup = wb > eig_floor * scale
    ker = vb[:, ~sup]
    if ker.shape[1]:
        leak = ker.conj().T @ A @ ker
        wl, vl = np.linalg.eigh(_herm(leak))
        if wl[-1] > eig_floor * scale:
            raise DopSupportError(
                "image(A) is not contained in image(B)", ker @ vl[:, -1]
            )
    V = vb[:, sup]
    a = _herm(V.conj().T @ A @ V)
    wa, ua = np.linalg.eigh(a)
    keep = wa > eig_floor * scale
    # work on the support of A: S = U sqrt(wa), rectangular
    s = ua[:, keep] * np.sqrt(wa[keep])
    m = _herm(s.conj().T @ (s / wb[sup][:, None]))
    wm, vm = np.linalg.eigh(m)
    lg = (vm * np.log(wm)) @ vm.conj().T
    d = s @ lg @ s.conj().T
    return _maybe_real(V @ d @ V.conj().T, A0, B0)


def geometric_mean(X, Y, t: float) -> np.ndarray:
    """Weighted geometric mean ``X #_t Y`` for ``X`` positive definite."""
    X = _herm(X)
    Y = _herm(Y)
    w, v = np.linalg.eigh(X)
    if w.min() <= 0:
        raise ValueError("X must be positive definite")
    xh = (v * np.sqrt(w)) @ v.conj().T
    xmh = (v / np.sqrt(w)) @ v.conj().T
    inner = _herm(xmh @ Y @ xmh)
    wi, vi = np.linalg.eigh(inner)
    p = (vi * np.maximum(wi, 0.0) ** t) @ vi.conj().T
    return xh @ p @ xh


def dop_m_exact(X, Y, m: int) -> np.ndarray:
    """``D^[m](X||Y) = 2^m (X - X #_{2^-m} Y)`` for ``X`` positive definite."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    X0, Y0 = X, Y
    X = _herm(X)
    Y = _herm(Y)
    if m == 0:
        return _maybe_real(X - Y, X0, Y0)
    return _maybe_real(2.0**m * (X - geometric_mean(X, Y, 2.0**-m)), X0, Y0)


def h_m_scalar(x, m: int):
    """``h_m(x) = 2^m (x^(2^-m) - 1)``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("h_m is defined for positive x only")
    if m < 0:
        raise ValueError("m must be nonnegative")
    out = 2.0**m * np.expm1(np.log(x) * 2.0**-m)
    return float(out) if out.ndim == 0 else out


def h_m_error_bound(x, m: int):
    """Upper bound ``2^-m [(x-1)^2 + (1/x-1)^2]`` on ``h_m(x) - log x``."""
    x = np.asarray(x, dtype=float)
    return 2.0**-m * ((x - 1) ** 2 + (1 / x - 1) ** 2)


def scalar_dop_m(x: float, y: float, m: int) -> float:
    """Scalar ``D^[m](x||y) = 2^m (x - x^(1-2^-m) y^(2^-m))`` (``x, y >= 0``)."""
    if m == 0:
        return x - y
    t = 2.0**-m
    return 2.0**m * (x - x ** (1 - t) * y**t)


@dataclass
class DopEmission:
    blocks: list  # AffineMatrix blocks that must be PSD
    n_new_vars: int
    aux: list  # the auxiliary matrices G_1..G_m


def emit_dop_m_constraint(
    X: AffineMatrix,
    Y: AffineMatrix,
    T: AffineMatrix,
    m: int,
    first_var: int,
    hermitian: bool = False,
) -> DopEmission:
    """PSD blocks whose joint feasibility encodes ``D^[m](X||Y) <= T``.

    Fresh auxiliary variables are numbered from ``first_var``.  With
    ``hermitian=False`` the ``G_k`` are real symmetric, which suffices when
    ``X, Y, T`` are real.
    """
    n = X.size
    if Y.size != n or T.size != n:
        raise ValueError("X, Y, T must have equal sizes")
    if m < 0:
        raise ValueError("m must be nonnegative")
    if m == 0:
        return DopEmission([T - X + Y], 0, [])
    aux = []
    nxt = first_var
    for _ in range(m):
        g, k = AffineMatrix.symmetric_variable(n, nxt, hermitian)
        aux.append(g)
        nxt += k
    blocks = [AffineMatrix.block([[X, aux[0]], [aux[0], Y]])]
    for k in range(1, m):
        blocks.append(AffineMatrix.block([[X, aux[k]], [aux[k], aux[k - 1]]]))
    s = 2.0**m
    blocks.append(T - X * s + aux[-1] * s)
    return DopEmission(blocks, nxt - first_var, aux)
