"""Solver-agnostic conic programs over real PSD blocks.

Form::

    minimize    c . x + c0
    subject to  A_eq x = b_eq
                F_j(x) = F_j0 + sum_k x_k F_jk  PSD   for every block j

Blocks store their lower triangle (``row >= col``); ``var == -1`` marks the
constant part.  Builders negate the objective for maximization.

:func:`reduce_program` eliminates the equalities (``x = x0 + N y``), drops
identically zero entries and splits blocks into connected components.  Every
backend and the SDPA exporter work on the reduced form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

ZERO_TOL = 1e-13


@dataclass
class PSDBlock:
    size: int
    rows: np.ndarray
    cols: np.ndarray
    vars: np.ndarray
    vals: np.ndarray
    name: str = ""

    def matrix(self, x) -> np.ndarray:
        """Dense symmetric value of the block at ``x``."""
        x = np.asarray(x, dtype=float)
        xv = np.where(self.vars >= 0, x[np.maximum(self.vars, 0)] if len(x) else 0.0, 1.0)
        out = np.zeros((self.size, self.size))
        np.add.at(out, (self.rows, self.cols), self.vals * xv)
        off = self.rows != self.cols
        np.add.at(out, (self.cols[off], self.rows[off]), self.vals[off] * xv[off])
        return out


@dataclass
class ConicProgram:
    n_vars: int
    c: np.ndarray
    c0: float = 0.0
    A_eq: sp.csr_matrix | None = None
    b_eq: np.ndarray | None = None
    blocks: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        if self.c.shape != (self.n_vars,):
            raise ValueError("objective length must equal n_vars")
        if self.A_eq is None:
            self.A_eq = sp.csr_matrix((0, self.n_vars))
            self.b_eq = np.zeros(0)
        self.A_eq = sp.csr_matrix(self.A_eq)
        self.b_eq = np.asarray(self.b_eq, dtype=float)
        if self.A_eq.shape[1] != self.n_vars:
            raise ValueError("equality matrix width must equal n_vars")
        for b in self.blocks:
            if len(b.vars) and b.vars.max() >= self.n_vars:
                raise ValueError(f"block {b.name!r} references an undeclared variable")
            if len(b.rows) and (b.rows < b.cols).any():
                raise ValueError(f"block {b.name!r} is not stored as a lower triangle")

    def negated(self) -> "ConicProgram":
        """Same feasible set, objective ``-(c . x + c0)``."""
        return ConicProgram(self.n_vars, -self.c, -self.c0, self.A_eq, self.b_eq, self.blocks, dict(self.meta))

    def with_objective(self, c, c0: float = 0.0) -> "ConicProgram":
        return ConicProgram(self.n_vars, c, c0, self.A_eq, self.b_eq, self.blocks, dict(self.meta))

    def objective_value(self, x) -> float:
        return float(self.c @ np.asarray(x, dtype=float) + self.c0)

    def violation(self, x) -> dict:
        """Equality residual and most negative block eigenvalue at ``x``."""
        x = np.asarray(x, dtype=float)
        eq = float(np.abs(self.A_eq @ x - self.b_eq).max(initial=0.0))
        psd = min((float(np.linalg.eigvalsh(b.matrix(x))[0]) for b in self.blocks), default=0.0)
        return {"equality": eq, "min_eig": psd}

    def summary(self) -> str:
        sizes = sorted((b.size for b in self.blocks), reverse=True)
        return f"{self.n_vars} vars, {self.A_eq.shape[0]} equalities, blocks {sizes}"


class ProgramBuilder:
    """Incremental assembly of a :class:`ConicProgram`."""

    def __init__(self, n_vars: int = 0):
        self.n_vars = n_vars
        self._eq_rows: list = []  # (vars, coefs, rhs)
        self.blocks: list[PSDBlock] = []
        self._obj = (np.zeros(0, np.int64), np.zeros(0), 0.0)
        self.meta: dict = {}

    def new_vars(self, k: int) -> int:
        first = self.n_vars
        self.n_vars += k
        return first

    def add_equality(self, vars, coefs, rhs: float = 0.0):
        """``sum coefs * x[vars] = rhs`` (``vars == -1`` entries move to the rhs)."""
        vars = np.asarray(vars, dtype=np.int64)
        coefs = np.asarray(coefs, dtype=float)
        const = coefs[vars < 0].sum()
        keep = vars >= 0
        self._eq_rows.append((vars[keep], coefs[keep], float(rhs) - const))

    def add_psd(self, m, name: str = "", tol: float = 1e-10):
        """Add a PSD constraint from an :class:`~kmsbound.moments.AffineMatrix`."""
        if hasattr(m, "as_real_symmetric"):
            m = m.as_real_symmetric(tol)
        coefs = np.asarray(m.coefs)
        if np.iscomplexobj(coefs):
            if np.abs(coefs.imag).max(initial=0.0) > tol:
                raise ValueError("PSD block must be real after realification")
            coefs = coefs.real
        low = m.rows >= m.cols
        blk = _compress_block(m.size, m.rows[low], m.cols[low], m.vars[low], coefs[low], name)
        self.blocks.append(blk)
        return blk

    def set_objective(self, vars, coefs, const: float = 0.0):
        self._obj = (np.asarray(vars, dtype=np.int64), np.asarray(coefs, dtype=float), float(const))

    def build(self) -> ConicProgram:
        c = np.zeros(self.n_vars)
        v, cf, c0 = self._obj
        const = cf[v < 0].sum()
        np.add.at(c, v[v >= 0], cf[v >= 0])
        if self._eq_rows:
            ri = np.concatenate([np.full(len(r[0]), i) for i, r in enumerate(self._eq_rows)])
            ci = np.concatenate([r[0] for r in self._eq_rows])
            vi = np.concatenate([r[1] for r in self._eq_rows])
            A = sp.csr_matrix((vi, (ri, ci)), shape=(len(self._eq_rows), self.n_vars))
            b = np.array([r[2] for r in self._eq_rows])
        else:
            A, b = None, None
        return ConicProgram(self.n_vars, c, c0 + const, A, b, list(self.blocks), dict(self.meta))


def _compress_block(size, rows, cols, vars, vals, name=""):
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vars = np.asarray(vars, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    if len(rows) == 0:
        return PSDBlock(size, rows, cols, vars, vals, name)
    nv = int(vars.max()) + 2
    key = (rows * size + cols) * nv + (vars + 1)
    u, inv = np.unique(key, return_inverse=True)
    acc = np.zeros(len(u))
    np.add.at(acc, inv, vals)
    keep = np.abs(acc) > ZERO_TOL
    u = u[keep]
    rc = u // nv
    return PSDBlock(size, rc // size, rc % size, u % nv - 1, acc[keep], name)


def block_from_dense(m, name: str = "", var_mats=()) -> PSDBlock:
    """``m + sum_k x_k var_mats[k]`` from dense symmetric matrices."""
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    r, c = np.tril_indices(n)
    rows, cols, vars, vals = [r], [c], [np.full(len(r), -1)], [m[r, c]]
    for k, f in enumerate(var_mats):
        f = np.asarray(f, dtype=float)
        rows.append(r); cols.append(c); vars.append(np.full(len(r), k)); vals.append(f[r, c])
    return _compress_block(n, np.concatenate(rows), np.concatenate(cols), np.concatenate(vars), np.concatenate(vals), name)


# reduction ------------------------------------------------------------------


class InfeasibleEqualities(ValueError):
    pass


@dataclass
class ReducedBlock:
    size: int
    rows: np.ndarray  # lower triangle entries, r >= c
    cols: np.ndarray
    F: sp.csr_matrix  # entry x reduced-variable coefficients
    f0: np.ndarray  # entry constants
    name: str = ""

    def matrix(self, y) -> np.ndarray:
        vals = self.f0 + self.F @ np.asarray(y, dtype=float)
        out = np.zeros((self.size, self.size))
        out[self.rows, self.cols] = vals
        out[self.cols, self.rows] = vals
        return out

    def coefficient_matrix(self, k: int) -> np.ndarray:
        col = self.F[:, k].toarray().ravel()
        out = np.zeros((self.size, self.size))
        out[self.rows, self.cols] = col
        out[self.cols, self.rows] = col
        return out


@dataclass
class ReducedProgram:
    """``min c.y + c0`` subject to ``f0_j + F_j y`` PSD; ``x = x0 + N y``."""

    n: int
    c: np.ndarray
    c0: float
    blocks: list
    x0: np.ndarray
    N: sp.csr_matrix
    const_blocks: list  # constant components (already checked feasible)
    source: ConicProgram | None = None

    def lift(self, y) -> np.ndarray:
        return self.x0 + self.N @ np.asarray(y, dtype=float)

    def block_sizes(self) -> list[int]:
        return [b.size for b in self.blocks]


def eliminate_equalities(A: sp.csr_matrix, b: np.ndarray, n: int, tol: float = 1e-10):
    """Affine parametrization ``x = x0 + N y`` of ``{x : A x = b}``.

    Uses column-pivoted QR on the columns that appear in ``A``; columns not
    touched by any equality pass through unchanged.
    """
    A = sp.csr_matrix(A)
    A.eliminate_zeros()
    if A.shape[0] == 0 or A.nnz == 0:
        if A.shape[0] and np.abs(b).max(initial=0.0) > tol:
            raise InfeasibleEqualities("constant equality with nonzero right-hand side")
        return np.zeros(n), sp.identity(n, format="csr")
    used = np.unique(A.indices)
    Ad = A[:, used].toarray()
    scale = max(np.abs(Ad).max(), 1.0)
    Q, R, piv = sla.qr(Ad, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    rank = int((d > tol * scale * max(Ad.shape)).sum())
    qtb = Q.T @ b
    resid = np.linalg.norm(b - Q[:, :rank] @ qtb[:rank])
    if resid > 1e-8 * max(1.0, np.linalg.norm(b)):
        raise InfeasibleEqualities(f"equalities inconsistent (residual {resid:.3g})")
    basic = used[piv[:rank]]
    free_used = used[piv[rank:]]
    R11 = R[:rank, :rank]
    R12 = R[:rank, rank:]
    xb0 = sla.solve_triangular(R11, qtb[:rank])
    M = -sla.solve_triangular(R11, R12) if R12.shape[1] else np.zeros((rank, 0))
    M[np.abs(M) < 1e-13] = 0.0
    untouched = np.setdiff1d(np.arange(n), used)
    free = np.concatenate([free_used, untouched])
    free.sort()
    col_of = {int(v): j for j, v in enumerate(free)}
    x0 = np.zeros(n)
    x0[basic] = xb0
    rows, cols, vals = [], [], []
    for v in free:
        rows.append(v); cols.append(col_of[int(v)]); vals.append(1.0)
    fu_cols = np.array([col_of[int(v)] for v in free_used], dtype=np.int64)
    br, bc = np.nonzero(M)
    N = sp.csr_matrix(
        (np.concatenate([vals, M[br, bc]]),
         (np.concatenate([rows, basic[br]]), np.concatenate([cols, fu_cols[bc]]))),
        shape=(n, len(free)),
    )
    return x0, N


def reduce_program(p: ConicProgram, split: bool = True, psd_tol: float = 1e-9) -> ReducedProgram:
    x0, N = eliminate_equalities(p.A_eq, p.b_eq, p.n_vars)
    N = sp.csr_matrix(N)
    n = N.shape[1]
    c = N.T @ p.c
    c0 = p.c0 + float(p.c @ x0)
    blocks, consts = [], []
    for blk in p.blocks:
        live = blk.vars >= 0
        # entry index per (row, col)
        key = blk.rows * blk.size + blk.cols
        ukey, ent = np.unique(key, return_inverse=True)
        f0 = np.zeros(len(ukey))
        np.add.at(f0, ent[~live], blk.vals[~live])
        E = sp.csr_matrix((blk.vals[live], (ent[live], blk.vars[live])), shape=(len(ukey), p.n_vars))
        f0 = f0 + E @ x0
        F = sp.csr_matrix(E @ N)
        F.data[np.abs(F.data) < ZERO_TOL] = 0.0
        F.eliminate_zeros()
        f0[np.abs(f0) < ZERO_TOL] = 0.0
        rows = ukey // blk.size
        cols = ukey % blk.size
        nz = (np.diff(F.indptr) > 0) | (f0 != 0)
        rows, cols, F, f0 = rows[nz], cols[nz], F[nz], f0[nz]
        parts = _split(blk.size, rows, cols) if split else [np.arange(blk.size)]
        for idx in parts:
            sel_map = np.full(blk.size, -1)
            sel_map[idx] = np.arange(len(idx))
            sel = (sel_map[rows] >= 0) & (sel_map[cols] >= 0)
            rb = ReducedBlock(len(idx), sel_map[rows[sel]], sel_map[cols[sel]], F[sel], f0[sel], blk.name)
            if rb.F.nnz == 0:
                m = rb.matrix(np.zeros(n))
                if len(idx) and np.linalg.eigvalsh(m)[0] < -psd_tol * max(1.0, np.abs(m).max()):
                    raise InfeasibleEqualities(f"constant block {blk.name!r} is not PSD")
                consts.append(rb)
                continue
            blocks.append(rb)
    return ReducedProgram(n, np.asarray(c).ravel(), c0, blocks, x0, N, consts, p)


def _split(size, rows, cols):
    """Index sets of connected components; rows/cols that never appear are dropped."""
    off = rows != cols
    g = sp.coo_matrix((np.ones(off.sum()), (rows[off], cols[off])), shape=(size, size))
    ncomp, lab = connected_components(g, directed=False)
    present = np.zeros(size, dtype=bool)
    present[rows] = True
    present[cols] = True
    out = []
    for k in range(ncomp):
        idx = np.nonzero((lab == k) & present)[0]
        if len(idx):
            out.append(idx)
    return out


class RowCompressor:
    """Accumulate dense equality rows ``[A | b]`` and keep an equivalent R factor.

    Row spaces are preserved, so the compressed system has the same solutions
    as the full one (inconsistency shows up as a row ``[0 | r]``).
    """

    def __init__(self, n: int):
        self.n = n
        self.R = np.zeros((0, n + 1))

    def add(self, A, b=None):
        A = np.asarray(A, dtype=float)
        if A.size == 0:
            return
        b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=float)
        rows = np.hstack([A, b[:, None]])
        scale = np.abs(rows).max(axis=1)
        keep = scale > ZERO_TOL
        if not keep.any():
            return
        rows = rows[keep] / scale[keep][:, None]
        stacked = np.vstack([self.R, rows])
        r = sla.qr(stacked, mode="r")[0]
        k = min(r.shape[0], self.n + 1)
        r = r[:k]
        self.R = r[np.abs(r).max(axis=1) > ZERO_TOL * max(1.0, np.abs(r).max())]

    def rows(self):
        return self.R[:, :-1], self.R[:, -1]


# SDPA export ----------------------------------------------------------------


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def sdpa_text(p: ConicProgram | ReducedProgram) -> str:
    """SDPA sparse text of the reduced program.

    SDPA reads ``min c.y`` subject to ``sum_k y_k F_k - F_0`` PSD, so
    ``F_0`` is the negated constant part.
    """
    red = p if isinstance(p, ReducedProgram) else reduce_program(p)
    lines = []
    if red.c0 != 0:
        lines.append(f"* objective constant {_fmt(red.c0)}")
    lines.append(str(red.n))
    lines.append(str(len(red.blocks)))
    lines.append(" ".join(str(b.size) for b in red.blocks))
    lines.append(" ".join(_fmt(v) for v in red.c))
    body = []
    for j, b in enumerate(red.blocks, 1):
        lo = np.minimum(b.rows, b.cols) + 1
        hi = np.maximum(b.rows, b.cols) + 1
        for e in np.nonzero(b.f0)[0]:
            body.append((0, j, lo[e], hi[e], -b.f0[e]))
        Fc = b.F.tocoo()
        for e, k, v in zip(Fc.row, Fc.col, Fc.data):
            body.append((k + 1, j, lo[e], hi[e], v))
    body.sort(key=lambda t: t[:4])
    lines.extend(f"{k} {j} {i} {jj} {_fmt(v)}" for k, j, i, jj, v in body)
    return "\n".join(lines) + "\n"


def export_sdpa(p, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(sdpa_text(p))
