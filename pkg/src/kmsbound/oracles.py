"""Reference values: exact diagonalization, TF-Ising closed forms, transfer matrix.

Conventions: the transverse-field Ising chain is ``H = -sum_i (Z_i Z_{i+1} + g X_i)``
and the classical chain is ``H = -sum_i (s_i s_{i+1} + h s_i)``.
"""

from __future__ import annotations

import csv
import io
import itertools
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.integrate import quad

from .lattice import InteractionSpec, Window, as_window
from .moments import MomentFunctional
from .pauli import PauliOperator, PauliString, to_sparse

ED_MAX_SITES = 12
DEGENERACY_TOL = 1e-8


# exact diagonalization --------------------------------------------------------------


def torus_sites(n: int, dim: int) -> list[tuple]:
    return list(itertools.product(range(n), repeat=dim))


def ring_hamiltonian(spec: InteractionSpec, n: int) -> sp.csr_matrix:
    """Sparse ``H`` on the periodic ``n^dim`` torus (site ``0`` most significant)."""
    dim = spec.dim
    if n <= 2 * spec.range:
        raise ValueError(f"ring of {n} sites is too small for interaction range {spec.range}")
    sites = torus_sites(n, dim)
    acc = PauliOperator()
    for term in spec.terms:
        for shift in sites:
            wrapped = {}
            for s, c in term.items():
                ps = PauliString(
                    [(tuple((a + b) % n for a, b in zip(coord, shift)), letter) for coord, letter in s]
                )
                wrapped[ps] = wrapped.get(ps, 0) + c
            acc = acc + PauliOperator(wrapped)
    H = to_sparse(acc, sites)
    return sp.csr_matrix((H + H.conj().T) / 2)


def _marginal(vecs: np.ndarray, weights: np.ndarray, n_total: int, keep: list[int]) -> np.ndarray:
    """``sum_k weights_k tr_rest |v_k><v_k|`` with kept qubits in the listed order."""
    k = vecs.shape[1]
    t = (vecs * np.sqrt(weights)).reshape((2,) * n_total + (k,))
    rest = [i for i in range(n_total) if i not in keep]
    t = np.transpose(t, keep + rest + [n_total])
    m = t.reshape(1 << len(keep), -1)
    rho = m @ m.conj().T
    return (rho + rho.conj().T) / 2


def ground_space(H: sp.csr_matrix, tol: float = DEGENERACY_TOL):
    """Ground energy and an orthonormal basis of the ground space."""
    dim = H.shape[0]
    if dim <= 1024:
        w, v = np.linalg.eigh(H.toarray())
    else:
        k = 8
        while True:
            w, v = sla.eigsh(H, k=k, which="SA", tol=1e-12)
            order = np.argsort(w)
            w, v = w[order], v[:, order]
            if w[-1] - w[0] > tol * max(1.0, abs(w[0])) * 10 or k >= dim - 2:
                break
            k = min(2 * k, dim - 2)
    scale = max(1.0, abs(w[0]))
    deg = w - w[0] <= tol * scale * 10
    return float(w[0]), v[:, deg]


def ed_gibbs_marginal(spec: InteractionSpec, n: int, beta: float, window, real: bool = False):
    """Marginal on ``window`` of the Gibbs state of the periodic torus of side ``n``.

    ``beta = inf`` gives the uniform mixture over an orthonormal ground-space
    basis.  Returns ``(rho, functional)`` where ``functional`` carries the
    orbit-averaged Pauli moments of ``rho``.
    """
    dim = spec.dim
    total = n**dim
    if total > ED_MAX_SITES:
        raise ValueError(f"{total} sites exceeds the exact-diagonalization cap of {ED_MAX_SITES}")
    w = as_window(window, dim)
    sites = torus_sites(n, dim)
    pos = {s: i for i, s in enumerate(sites)}
    keep = [pos[tuple(a % n for a in s)] for s in w.sites]
    if len(set(keep)) != len(keep):
        raise ValueError("window wraps around the ring")
    H = ring_hamiltonian(spec, n)
    if math.isinf(beta):
        _, vecs = ground_space(H)
        weights = np.full(vecs.shape[1], 1.0 / vecs.shape[1])
    else:
        evals, vecs = np.linalg.eigh(H.toarray())
        p = np.exp(-beta * (evals - evals[0]))
        weights = p / p.sum()
    rho = _marginal(vecs, weights, total, keep)
    return rho, MomentFunctional(w, real=real).from_state(rho)


# closed forms -----------------------------------------------------------------------


def tfising_magnetization(g: float) -> float:
    """Spontaneous ground-state magnetization ``(1 - g^2)^(1/8)`` below ``g = 1``."""
    if g < 0:
        raise ValueError("g must be nonnegative")
    return (1.0 - g * g) ** 0.125 if g < 1 else 0.0


def tfising_zz(g: float, beta: float = math.inf) -> float:
    """Nearest-neighbour ``<Z_0 Z_1>`` of the infinite chain at inverse temperature ``beta``."""
    if g < 0 or beta < 0:
        raise ValueError("g and beta must be nonnegative")

    def integrand(k):
        eps = math.sqrt(max(1.0 + 2.0 * g * math.cos(k) + g * g, 0.0))
        if eps == 0.0:
            return 0.0
        th = 1.0 if math.isinf(beta) else math.tanh(beta * eps)
        return (1.0 + g * math.cos(k)) / eps * th

    val, _ = quad(integrand, 0.0, math.pi, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val / math.pi


def classical_ising_transfer(beta: float, h: float = 0.0) -> tuple[float, float]:
    """``(<s_0>, <s_0 s_1>)`` of the infinite classical chain from the 2x2 transfer matrix."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    s = np.array([1.0, -1.0])
    T = np.exp(beta * np.outer(s, s) + beta * h * (s[:, None] + s[None, :]) / 2)
    w, v = np.linalg.eigh(T)
    lam, u = w[-1], v[:, -1]
    mag = float(np.sum(s * u * u))
    corr = float((u * s) @ T @ (u * s) / lam)
    return mag, corr


# oracle sweeps ----------------------------------------------------------------------

ORACLE_OBSERVABLES = ("Mz", "ZZ")


def oracle_value(observable: str, g: float, beta: float) -> float:
    if observable == "Mz":
        # the infinite-volume thermal state at beta < inf is unmagnetized
        return tfising_magnetization(g) if math.isinf(beta) else 0.0
    if observable == "ZZ":
        return tfising_zz(g, beta)
    raise ValueError(f"unknown oracle observable {observable!r}; known: {ORACLE_OBSERVABLES}")


def oracle_csv(observable: str, gs, betas) -> str:
    out = io.StringIO()
    wr = csv.writer(out, lineterminator="\n")
    wr.writerow(["g", "beta", "observable", "value"])
    for beta in betas:
        for g in gs:
            wr.writerow([repr(float(g)), "inf" if math.isinf(beta) else repr(float(beta)),
                         observable, repr(oracle_value(observable, g, beta))])
    return out.getvalue()
