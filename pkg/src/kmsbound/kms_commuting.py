"""Linear KMS relaxation for commuting Hamiltonians.

For commuting interactions the local KMS condition is linear: for ``a`` on
the closure ``Lbar = extend_boundary(L)`` and ``b`` on ``L``

    w(b a) = w(a s(b)),   s(b) = exp(-beta Ht) b exp(beta Ht),   Ht = H~_L,

together with stationarity ``w([a, h_X]) = 0`` for every term ``h_X`` inside
``Lbar``.  Writing ``w(a) = tr(rho a)`` on ``Lbar``, the KMS equalities for all
``a`` say ``rho b = s(b) rho``, i.e. ``exp(beta Ht) rho`` commutes with every
operator on ``L``.  Hence

    rho = exp(-beta Ht) (1_L (x) c),   c an operator on the boundary Lbar \\ L.

Two equivalent builders are provided:

``form="commutant"`` (default)
    variables are the coordinates of ``c`` in the boundary Pauli basis; the
    remaining conditions (hermiticity, normalization, translation
    identification, stationarity) are linear in them.  Small enough for
    ``L = {-3..3}`` in 1D.
``form="pairwise"``
    the literal program over canonical moment variables on ``Lbar`` with one
    equality per pair ``(a_i, b_j)``; only for closures of at most 6 sites.

With stationarity in force ``rho`` commutes with ``Ht``, so ``rho >= 0`` is
equivalent to ``c >= 0``; ``psd="boundary"`` uses that smaller block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
import scipy.sparse as sp

from . import kernels
from .conic import ConicProgram, ProgramBuilder, RowCompressor, block_from_dense
from .lattice import InteractionSpec, Window, extend_boundary, h_tilde_window, window_terms
from .moments import CONST, ZERO, MomentFunctional
from .pauli import PauliOperator, encode, to_dense, to_sparse
from .relaxation import RelaxationConfig, use_real_mode

PAIRWISE_MAX_SITES = 6
_I_POW = np.array([1, 1j, -1, -1j])


@dataclass(frozen=True)
class Conjugation:
    """``exp(-beta Ht)`` on the closure, shifted so its largest eigenvalue is 1."""

    window: Window
    closure: Window
    beta: float
    G: np.ndarray  # exp(-beta (Ht - min eig))
    Ginv: np.ndarray

    def conjugate(self, b: np.ndarray) -> np.ndarray:
        """``exp(-beta Ht) b exp(beta Ht)`` (the shift cancels)."""
        return self.G @ b @ self.Ginv


@lru_cache(maxsize=32)
def conjugation(spec: InteractionSpec, beta: float, window: Window) -> Conjugation:
    """Dense conjugation data, computed once per ``(spec, beta, window)``."""
    closure = extend_boundary(spec, window)
    Ht = to_dense(h_tilde_window(spec, window), closure.sites)
    w, v = np.linalg.eigh((Ht + Ht.conj().T) / 2)
    e = beta * (w - w.min())
    G = (v * np.exp(-e)) @ v.conj().T
    Ginv = (v * np.exp(e)) @ v.conj().T
    if spec.is_real():
        G, Ginv = G.real.copy(), Ginv.real.copy()
    G.setflags(write=False)
    Ginv.setflags(write=False)
    return Conjugation(window, closure, float(beta), G, Ginv)


def _deposit(k, positions):
    """Spread the low bits of ``k`` onto the given bit positions."""
    k = np.asarray(k, dtype=np.int64)
    out = np.zeros_like(k)
    for j, p in enumerate(positions):
        out |= ((k >> j) & 1) << int(p)
    return out


def _sub_strings(positions):
    """All ``(x, z)`` codes supported on ``positions`` (identity first)."""
    nb = len(positions)
    k = np.arange(4**nb, dtype=np.int64)
    return _deposit(k % (1 << nb), positions), _deposit(k >> nb, positions)


def _shift_pairs(window: Window, closure: Window):
    """Pairs of codes ``(P, tau_x P)`` for strings ``P`` on ``window``, ``x in {-1,0,1}^D``.

    Shifts that push a string off the closure are skipped.
    """
    idx = closure.index
    lam_pos = [idx[s] for s in window.sites]
    px, pz = _sub_strings(lam_pos)
    out = []
    for x in product((-1, 0, 1), repeat=window.dim):
        if not any(x):
            continue
        dest = [idx.get(tuple(a + b for a, b in zip(s, x)), -1) for s in window.sites]
        tx = np.zeros_like(px)
        tz = np.zeros_like(pz)
        ok = np.ones(len(px), dtype=bool)
        for j, (src, d) in enumerate(zip(lam_pos, dest)):
            bx = (px >> src) & 1
            bz = (pz >> src) & 1
            if d < 0:
                ok &= (bx | bz) == 0
                continue
            tx |= bx << d
            tz |= bz << d
        ok[0] = False
        out.append((px[ok], pz[ok], tx[ok], tz[ok]))
    return out


@dataclass
class CommutingRelaxation:
    program: ConicProgram
    window: Window
    closure: Window
    form: str
    real: bool
    functional: MomentFunctional
    states: np.ndarray | None = None  # commutant form: rho_k, shape (nv, D, D)

    def rho_of(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.form == "commutant":
            return np.tensordot(x[: len(self.states)], self.states, axes=1)
        return self.functional.state(x[: self.functional.n_vars])

    def moments_of(self, x) -> MomentFunctional:
        if self.form == "commutant":
            rho = self.rho_of(x)
            rho = (rho + rho.conj().T) / 2
            return self.functional.from_state(rho)
        return self.functional.with_values(np.asarray(x)[: self.functional.n_vars])

    def assignment_from_state(self, rho: np.ndarray) -> np.ndarray:
        """Least-squares program variables reproducing a closure state."""
        if self.form == "pairwise":
            return self.functional.values_from_state(rho)
        nv = len(self.states)
        M = self.states.reshape(nv, -1).T
        rhs = np.asarray(rho, dtype=complex).ravel()
        if np.isrealobj(self.states):
            A = np.vstack([M, np.zeros_like(M)])
        else:
            A = np.vstack([M.real, M.imag])
        b = np.concatenate([rhs.real, rhs.imag])
        x, *_ = np.linalg.lstsq(A, b, rcond=None)
        return x


def _check(spec: InteractionSpec, cfg: RelaxationConfig):
    if not spec.is_commuting:
        raise ValueError("the linear KMS relaxation needs a commuting Hamiltonian")
    if math.isinf(cfg.beta):
        raise ValueError("beta must be finite; use the ground-state relaxation for beta = inf")
    w = cfg.resolve_window(spec.dim)
    closure = extend_boundary(spec, w)
    obj = cfg.objective
    if not closure.contains_support(obj):
        raise ValueError("objective support lies outside the window closure")
    if not obj.is_hermitian():
        raise ValueError("objective must be Hermitian")
    real = use_real_mode(spec, obj) if cfg.real is None else cfg.real
    if real and not spec.is_real():
        raise ValueError("real mode requires a Hamiltonian without odd-Y terms")
    return w, closure, real


def build_commuting_relaxation(
    spec: InteractionSpec,
    cfg: RelaxationConfig,
    form: str = "commutant",
    psd: str = "density",
) -> CommutingRelaxation:
    w, closure, real = _check(spec, cfg)
    if form == "commutant":
        rel = _build_commutant(spec, cfg, w, closure, real, psd)
    elif form == "pairwise":
        if psd != "density":
            raise ValueError("the pairwise form only supports psd='density'")
        rel = _build_pairwise(spec, cfg, w, closure, real)
    else:
        raise ValueError("form must be 'commutant' or 'pairwise'")
    rel.program.meta.update(
        window=w.sites, closure=closure.sites, beta=cfg.beta, real=real,
        sense=cfg.sense, form=form, psd=psd,
    )
    return rel


def build_commuting(spec: InteractionSpec, cfg: RelaxationConfig, **kw) -> ConicProgram:
    """Program minimizing ``w(O)`` (``sense='min'``) or ``-w(O)`` (``'max'``)."""
    return build_commuting_relaxation(spec, cfg, **kw).program


# commutant form ---------------------------------------------------------------------


def _boundary_basis(closure: Window, w: Window, real: bool):
    """Real-coefficient basis ``M_k`` of boundary operators ``1_L (x) c``.

    In real mode only real matrices are kept (``Q`` or ``iQ`` for an odd
    number of Y's); otherwise each Pauli string contributes ``Q`` and ``iQ``.
    Returns the sparse closure matrices and the dense boundary factors.
    """
    n = closure.n_sites
    idx = closure.index
    bnd = [s for s in closure.sites if s not in w.site_set]
    bpos = [idx[s] for s in bnd]
    nb = len(bnd)
    bx, bz = _sub_strings(bpos)
    lx, lz = _sub_strings(list(range(nb)))
    full, local = [], []
    for x, z, xl, zl in zip(bx, bz, lx, lz):
        phases = [1.0]
        if real:
            phases = [1j] if kernels.popcount(np.array([x & z]))[0] % 2 else [1.0]
        else:
            phases = [1.0, 1j]
        for ph in phases:
            r, c, v = kernels.pauli_sparse(np.array([x]), np.array([z]), np.array([ph]), n)
            full.append(sp.csr_matrix((v, (r, c)), shape=(1 << n, 1 << n)))
            r, c, v = kernels.pauli_sparse(np.array([xl]), np.array([zl]), np.array([ph]), nb)
            local.append(sp.csr_matrix((v, (r, c)), shape=(1 << nb, 1 << nb)).toarray())
    if real:
        full = [m.real for m in full]
        local = [m.real for m in local]
    return full, local


def _build_commutant(spec, cfg, w, closure, real, psd):
    if psd not in ("density", "boundary"):
        raise ValueError("psd must be 'density' or 'boundary'")
    n = closure.n_sites
    size = 1 << n
    conj = conjugation(spec, float(cfg.beta), w)
    full, local = _boundary_basis(closure, w, real)
    nv = len(full)
    G = conj.G
    states = np.stack([np.asarray((m.T @ G.T).T) for m in full])  # G @ M_k
    if real:
        states = states.real
    rc = RowCompressor(nv)

    # normalization
    rc.add(np.trace(states, axis1=1, axis2=2).real[None, :], np.array([1.0]))
    # hermiticity
    r, c = np.tril_indices(size)
    diff = (states - np.conj(np.transpose(states, (0, 2, 1))))[:, r, c].T
    rc.add(diff.real)
    if not real:
        rc.add(diff.imag)
    del diff
    # stationarity: [h_X, rho] = 0
    for h in window_terms(spec, closure):
        hm = to_sparse(h, closure.sites)
        for k0 in range(0, nv, 8):
            blk = states[k0:k0 + 8]
            comm = np.stack([np.asarray(hm @ s) - np.asarray((hm.T @ s.T).T) for s in blk])
            rows = comm.reshape(len(blk), -1).T
            A = np.zeros((rows.shape[0], nv))
            A[:, k0:k0 + len(blk)] = rows.real
            rc.add(A)
            if not real:
                A[:, k0:k0 + len(blk)] = rows.imag
                rc.add(A)
    # moments of the basis states
    E = np.stack([kernels.pauli_expectations(s) for s in states])  # (nv, size, size)
    for px, pz, tx, tz in _shift_pairs(w, closure):
        rc.add((E[:, px, pz] - E[:, tx, tz]).real.T)

    pb = ProgramBuilder(nv)
    A, b = rc.rows()
    for row, rhs in zip(A, b):
        nz = np.nonzero(row)[0]
        pb.add_equality(nz, row[nz], rhs)

    if psd == "density":
        herm = (states + np.conj(np.transpose(states, (0, 2, 1)))) / 2
        if real:
            mats = [h.real for h in herm]
        else:
            mats = [np.block([[h.real, -h.imag], [h.imag, h.real]]) for h in herm]
        pb.blocks.append(block_from_dense(np.zeros_like(mats[0]), "closure_state", mats))
    else:
        if real:
            mats = [(m + m.T) / 2 for m in local]
        else:
            mats = []
            for m in local:
                h = (m + m.conj().T) / 2
                mats.append(np.block([[h.real, -h.imag], [h.imag, h.real]]))
        pb.blocks.append(block_from_dense(np.zeros_like(mats[0]), "boundary_factor", mats))

    xs, zs, cs = encode(cfg.objective, closure.sites)
    obj = (E[:, xs, zs] @ cs).real
    sign = 1.0 if cfg.sense == "min" else -1.0
    pb.set_objective(np.arange(nv), sign * obj)
    f = MomentFunctional(closure, real=real)
    return CommutingRelaxation(pb.build(), w, closure, "commutant", real, f, states)


# pairwise form ----------------------------------------------------------------------


def _product_rows(f: MomentFunctional, x1, z1, c1, x2, z2, rows, n_rows):
    """Sparse rows ``sum c1 * w(P1 P2)`` (complex) plus constant column."""
    x, z, k = kernels.pauli_product(x1, z1, x2, z2)
    v = f.var_table[x, z]
    coef = c1 * _I_POW[k % 4]
    live = v != ZERO
    col = np.where(v[live] == CONST, f.n_vars, v[live])
    return sp.coo_matrix((coef[live], (rows[live], col)), shape=(n_rows, f.n_vars + 1))


def _add_complex_rows(rc: RowCompressor, M: sp.spmatrix):
    # variables are real, so both parts are constraints (also in real mode,
    # where products like X Y carry a factor i)
    M = sp.csr_matrix(M)
    for part in (M.real, M.imag):
        d = part.toarray()
        rc.add(d[:, :-1], -d[:, -1])


def _build_pairwise(spec, cfg, w, closure, real):
    n = closure.n_sites
    if n > PAIRWISE_MAX_SITES:
        raise ValueError(f"pairwise form is limited to closures of {PAIRWISE_MAX_SITES} sites")
    size = 1 << n
    conj = conjugation(spec, float(cfg.beta), w)
    f = MomentFunctional(closure, real=real)
    nv = f.n_vars
    idx = closure.index
    ax, az = _sub_strings(list(range(n)))
    na = len(ax)
    bx, bz = _sub_strings([idx[s] for s in w.sites])
    rc = RowCompressor(nv)
    rows = np.arange(na)
    for xb, zb in zip(bx, bz):
        r, c, v = kernels.pauli_sparse(np.array([xb]), np.array([zb]), np.array([1.0 + 0j]), n)
        bm = sp.csr_matrix((v, (r, c)), shape=(size, size)).toarray()
        sb = conj.conjugate(bm)
        e = kernels.pauli_expectations(sb) / size
        sx, sz = np.nonzero(np.abs(e) > 1e-14)
        recon = sp.csr_matrix((size, size), dtype=complex)
        for x, z in zip(sx, sz):
            r, c, v = kernels.pauli_sparse(np.array([x]), np.array([z]), np.array([e[x, z]]), n)
            recon = recon + sp.csr_matrix((v, (r, c)), shape=(size, size))
        err = np.abs(recon.toarray() - sb).max()
        assert err < 1e-9 * max(1.0, np.abs(sb).max()), "conjugated operator failed to re-expand"
        # w(b a_i) - sum_t e_t w(a_i S_t)
        M = _product_rows(f, np.full(na, xb), np.full(na, zb), np.ones(na), ax, az, rows, na)
        for x, z in zip(sx, sz):
            M = M - _product_rows(f, ax, az, np.full(na, e[x, z]), np.full(na, x), np.full(na, z), rows, na)
        _add_complex_rows(rc, M)
    for h in window_terms(spec, closure):
        hx, hz, hc = encode(h, closure.sites)
        M = sp.coo_matrix((na, nv + 1), dtype=complex)
        for x, z, c in zip(hx, hz, hc):
            M = M + _product_rows(f, ax, az, np.full(na, c), np.full(na, x), np.full(na, z), rows, na)
            M = M - _product_rows(f, np.full(na, x), np.full(na, z), np.full(na, c), ax, az, rows, na)
        _add_complex_rows(rc, M)

    pb = ProgramBuilder(nv)
    A, b = rc.rows()
    for row, rhs in zip(A, b):
        nz = np.nonzero(row)[0]
        pb.add_equality(nz, row[nz], rhs)
    pb.add_psd(f.density_matrix(), "closure_state")
    form = f.evaluate(cfg.objective)
    sign = 1.0 if cfg.sense == "min" else -1.0
    pb.set_objective(form.vars, sign * form.coefs.real, sign * form.const.real)
    return CommutingRelaxation(pb.build(), w, closure, "pairwise", real, f)


# checks -----------------------------------------------------------------------------


def kms_residual(spec: InteractionSpec, beta: float, window: Window, rho: np.ndarray) -> float:
    """Largest ``|[exp(beta Ht) rho, b]|`` over Pauli ``b`` on the window.

    Zero exactly when ``rho`` (a closure state) satisfies the linear KMS
    equalities for every ``a`` on the closure.
    """
    conj = conjugation(spec, float(beta), window)
    X = conj.Ginv @ rho
    n = conj.closure.n_sites
    idx = conj.closure.index
    worst = 0.0
    for pos in (idx[s] for s in window.sites):
        for x, z in ((1, 0), (0, 1)):
            r, c, v = kernels.pauli_sparse(np.array([x << pos]), np.array([z << pos]), np.array([1.0 + 0j]), n)
            b = sp.csr_matrix((v, (r, c)), shape=(1 << n, 1 << n))
            comm = np.asarray(b @ X) - np.asarray((b.T @ X.T).T)
            worst = max(worst, float(np.abs(comm).max()))
    # the shift in G scales X; report relative to it
    return worst / max(np.abs(X).max(), 1e-300)
