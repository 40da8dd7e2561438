"""Moment functionals on a finite window and affine expression matrices.

A :class:`MomentFunctional` assigns one real variable to every translation
class of Pauli strings inside its window.  The identity is pinned to 1.  In
real mode (Hamiltonian and objective invariant under complex conjugation)
strings with an odd number of ``Y`` letters are pinned to 0; by convexity
this loses nothing for bounds on real observables.

Affine expressions are stored in coordinate form: entry ``(r, c)`` of an
:class:`AffineMatrix` is ``sum coef * x[var]`` with ``var == -1`` meaning the
constant 1.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .lattice import Window
from .pauli import PauliOperator, PauliString, decode, encode, parse_operator

CONST = -1
ZERO = -2
MAX_SITES = 10


@dataclass
class AffineForm:
    """``const + sum coefs[k] * x[vars[k]]`` with complex coefficients."""

    const: complex
    vars: np.ndarray
    coefs: np.ndarray

    def compress(self, tol: float = 0.0) -> "AffineForm":
        if len(self.vars) == 0:
            return self
        u, inv = np.unique(self.vars, return_inverse=True)
        c = np.zeros(len(u), dtype=np.complex128)
        np.add.at(c, inv, self.coefs)
        keep = np.abs(c) > tol
        return AffineForm(self.const, u[keep], c[keep])

    def value(self, x) -> complex:
        x = np.asarray(x)
        return complex(self.const + np.dot(self.coefs, x[self.vars]))

    @property
    def real(self) -> "AffineForm":
        return AffineForm(complex(self.const.real), self.vars, self.coefs.real.astype(complex))

    @property
    def imag(self) -> "AffineForm":
        return AffineForm(complex(self.const.imag), self.vars, self.coefs.imag.astype(complex))

    def is_constant(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.compress().coefs) <= tol))

    def __add__(self, other: "AffineForm") -> "AffineForm":
        return AffineForm(
            self.const + other.const,
            np.concatenate([self.vars, other.vars]),
            np.concatenate([self.coefs, other.coefs]),
        ).compress()

    def __mul__(self, s) -> "AffineForm":
        return AffineForm(self.const * s, self.vars, self.coefs * s)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, AffineForm):
            return NotImplemented
        a, b = self.compress(1e-14), other.compress(1e-14)
        return (
            abs(a.const - b.const) <= 1e-12
            and np.array_equal(a.vars, b.vars)
            and np.allclose(a.coefs, b.coefs, atol=1e-12)
        )


class AffineMatrix:
    """Square matrix of affine expressions in coordinate form (full pattern)."""

    __slots__ = ("size", "rows", "cols", "vars", "coefs")

    def __init__(self, size, rows, cols, vars, coefs):
        self.size = int(size)
        self.rows = np.asarray(rows, dtype=np.int64)
        self.cols = np.asarray(cols, dtype=np.int64)
        self.vars = np.asarray(vars, dtype=np.int64)
        self.coefs = np.asarray(coefs, dtype=np.complex128)

    # constructors
    @classmethod
    def constant(cls, m) -> "AffineMatrix":
        m = np.asarray(m, dtype=np.complex128)
        r, c = np.nonzero(m)
        return cls(m.shape[0], r, c, np.full(len(r), CONST), m[r, c])

    @classmethod
    def identity(cls, n: int, scale: float = 1.0) -> "AffineMatrix":
        i = np.arange(n)
        return cls(n, i, i, np.full(n, CONST), np.full(n, scale, dtype=np.complex128))

    @classmethod
    def from_lower(cls, size, rows, cols, vars, coefs) -> "AffineMatrix":
        """Mirror a lower-triangle Hermitian pattern into the full pattern."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vars = np.asarray(vars, dtype=np.int64)
        coefs = np.asarray(coefs, dtype=np.complex128)
        off = rows != cols
        return cls(
            size,
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vars, vars[off]]),
            np.concatenate([coefs, coefs[off].conj()]),
        )

    @classmethod
    def symmetric_variable(cls, n: int, first_var: int, hermitian: bool = False):
        """Matrix of fresh variables; returns ``(matrix, n_new_vars)``.

        Real symmetric uses ``n(n+1)/2`` variables; Hermitian adds
        ``n(n-1)/2`` imaginary parts.
        """
        r, c = np.tril_indices(n)
        k = len(r)
        vre = first_var + np.arange(k)
        rows, cols, vars, coefs = [r], [c], [vre], [np.ones(k, complex)]
        off = r != c
        rows.append(c[off]); cols.append(r[off]); vars.append(vre[off]); coefs.append(np.ones(off.sum(), complex))
        n_new = k
        if hermitian:
            ko = int(off.sum())
            vim = first_var + k + np.arange(ko)
            rows += [r[off], c[off]]
            cols += [c[off], r[off]]
            vars += [vim, vim]
            coefs += [np.full(ko, 1j), np.full(ko, -1j)]
            n_new += ko
        m = cls(n, np.concatenate(rows), np.concatenate(cols), np.concatenate(vars), np.concatenate(coefs))
        return m, n_new

    @staticmethod
    def block(blocks) -> "AffineMatrix":
        """Assemble a block matrix from a square grid (``None`` = zero block)."""
        sizes = []
        for i, row in enumerate(blocks):
            s = next((b.size for b in row if b is not None), None)
            if s is None:
                raise ValueError(f"block row {i} is entirely zero")
            sizes.append(s)
        offs = np.concatenate([[0], np.cumsum(sizes)])
        parts = []
        for i, row in enumerate(blocks):
            for j, b in enumerate(row):
                if b is None:
                    continue
                if b.size != sizes[i] or b.size != sizes[j]:
                    raise ValueError("block size mismatch")
                parts.append((b.rows + offs[i], b.cols + offs[j], b.vars, b.coefs))
        return AffineMatrix(
            offs[-1],
            np.concatenate([p[0] for p in parts]),
            np.concatenate([p[1] for p in parts]),
            np.concatenate([p[2] for p in parts]),
            np.concatenate([p[3] for p in parts]),
        )

    # algebra
    def __add__(self, other: "AffineMatrix") -> "AffineMatrix":
        if other.size != self.size:
            raise ValueError("size mismatch")
        return AffineMatrix(
            self.size,
            np.concatenate([self.rows, other.rows]),
            np.concatenate([self.cols, other.cols]),
            np.concatenate([self.vars, other.vars]),
            np.concatenate([self.coefs, other.coefs]),
        )

    def __mul__(self, s) -> "AffineMatrix":
        return AffineMatrix(self.size, self.rows, self.cols, self.vars, self.coefs * s)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def adjoint(self) -> "AffineMatrix":
        return AffineMatrix(self.size, self.cols, self.rows, self.vars, self.coefs.conj())

    def hermitian_part(self) -> "AffineMatrix":
        return (self + self.adjoint()) * 0.5

    def conjugate_diag(self, u) -> "AffineMatrix":
        """``diag(u) M diag(u)^dagger``."""
        u = np.asarray(u, dtype=np.complex128)
        return AffineMatrix(
            self.size, self.rows, self.cols, self.vars,
            self.coefs * u[self.rows] * u[self.cols].conj(),
        )

    def compress(self, tol: float = 1e-13) -> "AffineMatrix":
        if len(self.rows) == 0:
            return self
        nv = max(int(self.vars.max()) + 2, 1)
        key = (self.rows * self.size + self.cols) * nv + (self.vars + 1)
        u, inv = np.unique(key, return_inverse=True)
        c = np.zeros(len(u), dtype=np.complex128)
        np.add.at(c, inv, self.coefs)
        keep = np.abs(c) > tol
        u = u[keep]
        v = u % nv - 1
        rc = u // nv
        return AffineMatrix(self.size, rc // self.size, rc % self.size, v, c[keep])

    def max_imag(self) -> float:
        m = self.compress()
        return float(np.abs(m.coefs.imag).max(initial=0.0))

    def real_part(self) -> "AffineMatrix":
        return AffineMatrix(self.size, self.rows, self.cols, self.vars, self.coefs.real.astype(complex))

    def realify(self) -> "AffineMatrix":
        """Real symmetric ``[[Re, -Im], [Im, Re]]`` of a Hermitian matrix."""
        n = self.size
        m = self.compress()
        re = m.coefs.real
        im = m.coefs.imag
        nz = im != 0
        rows = [m.rows, m.rows + n, m.rows[nz] + n, m.rows[nz]]
        cols = [m.cols, m.cols + n, m.cols[nz], m.cols[nz] + n]
        vars = [m.vars, m.vars, m.vars[nz], m.vars[nz]]
        coefs = [re, re, im[nz], -im[nz]]
        return AffineMatrix(
            2 * n, np.concatenate(rows), np.concatenate(cols),
            np.concatenate(vars), np.concatenate(coefs).astype(complex),
        )

    def as_real_symmetric(self, tol: float = 1e-10) -> "AffineMatrix":
        """Drop an imaginary part that vanishes, else realify."""
        if self.max_imag() <= tol:
            return self.real_part().compress()
        return self.realify().compress()

    def value(self, x, shape=None) -> np.ndarray:
        """Dense value at ``x``; ``shape`` for rectangular patterns such as cross grams."""
        x = np.asarray(x, dtype=np.complex128)
        out = np.zeros(shape or (self.size, self.size), dtype=np.complex128)
        xv = np.where(self.vars >= 0, x[np.maximum(self.vars, 0)] if len(x) else 0, 1.0)
        np.add.at(out, (self.rows, self.cols), self.coefs * xv)
        return out

    def max_var(self) -> int:
        return int(self.vars.max(initial=-1))

    def __repr__(self):
        return f"AffineMatrix(size={self.size}, nnz={len(self.rows)})"


class MomentFunctional:
    """Translation-canonicalized moment variables on a finite window."""

    def __init__(self, window: Window, real: bool = False, values=None):
        window = window if isinstance(window, Window) else Window(tuple(window))
        n = window.n_sites
        if n > MAX_SITES:
            raise ValueError(f"window of {n} sites exceeds the cap of {MAX_SITES}")
        self.window = window
        self.real = bool(real)
        self.n_sites = n
        self._build()
        self.values = None if values is None else np.asarray(values, dtype=float)

    def _build(self):
        sites = self.window.sites
        n = self.n_sites
        diffs = sorted(
            {tuple(b - a for a, b in zip(sites[i], sites[j])) for i in range(n) for j in range(i, n)}
        )
        pos = {d: k for k, d in enumerate(diffs)}
        table = np.full((n, n), -1, dtype=np.int64)
        for s in range(n):
            for j in range(s, n):
                table[s, j] = pos[tuple(b - a for a, b in zip(sites[s], sites[j]))]
        fb = len(diffs)
        if 2 * fb > 62:
            raise ValueError("window too large for integer moment keys")
        size = 1 << n
        idx = np.arange(size * size, dtype=np.int64)
        x = idx % size
        z = idx // size
        keys = kernels.canonical_keys(x, z, table, fb)
        uniq, first, inv = np.unique(keys, return_index=True, return_inverse=True)
        # uniq[0] is the identity key 0
        var = inv - 1
        if self.real:
            ny_odd = kernels.popcount(x & z) & 1
            odd_class = np.zeros(len(uniq), dtype=bool)
            odd_class[inv[ny_odd == 1]] = True
            keep = ~odd_class
            keep[0] = False
            newid = np.full(len(uniq), ZERO, dtype=np.int64)
            newid[keep] = np.arange(keep.sum())
            newid[0] = CONST
            var = newid[inv]
            first = first[keep]
        else:
            var[var == -1] = CONST
            first = first[1:]
        self.frame_bits = fb
        self.table = table
        self.var_table = var.reshape(size, size).T.copy()  # [x, z]
        self.n_vars = len(first)
        self._rep_x = x[first]
        self._rep_z = z[first]

    # lookup ---------------------------------------------------------------
    @cached_property
    def representatives(self) -> list[PauliString]:
        return [decode(int(a), int(b), self.window.sites) for a, b in zip(self._rep_x, self._rep_z)]

    def var_of(self, s) -> int:
        """Variable id of a Pauli string (``-1`` constant, ``-2`` fixed zero)."""
        if not isinstance(s, PauliString):
            s = PauliString(s)
        xs, zs, _ = encode(PauliOperator({s: 1.0}), self.window.sites)
        return int(self.var_table[xs[0], zs[0]])

    def evaluate(self, a: PauliOperator) -> AffineForm:
        """Affine expression for ``w(a)``."""
        if len(a) == 0:
            return AffineForm(0j, np.zeros(0, np.int64), np.zeros(0, complex))
        xs, zs, cs = encode(a, self.window.sites)
        v = self.var_table[xs, zs]
        const = complex(cs[v == CONST].sum())
        live = v >= 0
        return AffineForm(const, v[live], cs[live]).compress()

    def encode_sub(self, sites) -> np.ndarray:
        """Window bit position of each listed site."""
        idx = self.window.index
        try:
            return np.array([idx[tuple(s)] for s in sites], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"site {exc.args[0]} outside the moment window") from None

    def sub_table(self, sites) -> np.ndarray:
        """Variable table ``[x, z]`` for strings on ``sites`` in their local bit order."""
        bits = self.encode_sub(sites)
        k = len(bits)
        loc = np.arange(1 << k, dtype=np.int64)
        glob = np.zeros_like(loc)
        for j, b in enumerate(bits):
            glob |= ((loc >> j) & 1) << b
        return self.var_table[np.ix_(glob, glob)]

    def string_gram(self, xl, zl, xr, zr) -> AffineMatrix:
        """``[w(P_i P_j)]`` for strings given in window bits (left ``i``, right ``j``)."""
        xl, zl, xr, zr = (np.asarray(v, dtype=np.int64) for v in (xl, zl, xr, zr))
        xo, zo, k = kernels.pauli_product(xl[:, None], zl[:, None], xr[None, :], zr[None, :])
        v = self.var_table[xo, zo]
        keep = v != ZERO
        r, c = np.nonzero(keep)
        coefs = np.array([1, 1j, -1, -1j])[k[keep]]
        return AffineMatrix(len(xl), r, c, v[keep], coefs)

    def moment_matrix(self, basis) -> AffineMatrix:
        """Hermitian expression matrix ``[w(a_i^dagger a_j)]``."""
        basis = list(basis)
        strings: dict[PauliString, int] = {}
        for a in basis:
            if not self.window.contains_support(a):
                raise ValueError("basis element escapes the moment window")
            for s in a:
                strings.setdefault(s, len(strings))
        xs, zs, _ = encode(PauliOperator({s: 1.0 for s in strings}), self.window.sites)
        g = self.string_gram(xs, zs, xs, zs)
        cmat = np.zeros((len(strings), len(basis)), dtype=np.complex128)
        for j, a in enumerate(basis):
            for s, c in a.items():
                cmat[strings[s], j] = c
        if np.allclose(cmat, np.eye(len(strings), len(basis))) and len(strings) == len(basis):
            return g
        # M_ij = sum_pq conj(C_pi) C_qj G_pq
        rows, cols, vars, coefs = [], [], [], []
        for i in range(len(basis)):
            pi = np.nonzero(cmat[:, i])[0]
            for j in range(len(basis)):
                qj = np.nonzero(cmat[:, j])[0]
                sel = np.isin(g.rows, pi) & np.isin(g.cols, qj)
                w = cmat[g.rows[sel], i].conj() * cmat[g.cols[sel], j]
                rows.append(np.full(sel.sum(), i)); cols.append(np.full(sel.sum(), j))
                vars.append(g.vars[sel]); coefs.append(g.coefs[sel] * w)
        return AffineMatrix(
            len(basis), np.concatenate(rows), np.concatenate(cols),
            np.concatenate(vars), np.concatenate(coefs),
        ).compress()

    def density_matrix(self, sites=None) -> AffineMatrix:
        """``2^n rho`` with ``rho = 2^-n sum_P w(P) P`` on ``sites`` (default: window)."""
        sites = self.window.sites if sites is None else sites
        k = len(sites)
        r, c, v, cf = kernels.density_triplets(k, self.sub_table(sites))
        return AffineMatrix.from_lower(1 << k, r, c, v, cf * (1 << k))

    # assignments ------------------------------------------------------------
    def with_values(self, values) -> "MomentFunctional":
        out = object.__new__(MomentFunctional)
        out.__dict__.update(self.__dict__)
        out.values = np.asarray(values, dtype=float).copy()
        if out.values.shape != (self.n_vars,):
            raise ValueError(f"expected {self.n_vars} values, got {out.values.shape}")
        return out

    def expectation(self, a: PauliOperator) -> complex:
        if self.values is None:
            raise ValueError("functional has no assignment")
        return self.evaluate(a).value(self.values)

    def values_from_state(self, rho: np.ndarray) -> np.ndarray:
        """Orbit-averaged Pauli expectations ``tr(rho P)`` of a window state."""
        size = 1 << self.n_sites
        e = kernels.pauli_expectations(np.asarray(rho, dtype=np.complex128))
        v = self.var_table.ravel()
        vals = e.real.ravel()
        live = v >= 0
        tot = np.bincount(v[live], weights=vals[live], minlength=self.n_vars)
        cnt = np.bincount(v[live], minlength=self.n_vars)
        assert e.shape == (size, size)
        return tot / np.maximum(cnt, 1)

    def from_state(self, rho: np.ndarray) -> "MomentFunctional":
        return self.with_values(self.values_from_state(rho))

    def state(self, values=None) -> np.ndarray:
        """Dense window operator ``rho = 2^-n sum_P w(P) P`` of an assignment."""
        vals = self.values if values is None else np.asarray(values, dtype=float)
        return self.density_matrix().value(vals) / (1 << self.n_sites)

    # CSV --------------------------------------------------------------------
    def to_csv(self, fh=None) -> str:
        if self.values is None:
            raise ValueError("functional has no assignment")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pauli_string", "value"])
        w.writerow(["I", "1"])
        for s, v in zip(self.representatives, self.values):
            w.writerow([s.label(), repr(float(v))])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    def read_csv(self, text: str) -> "MomentFunctional":
        """Assignment from ``pauli_string,value`` rows (missing classes raise)."""
        vals = np.full(self.n_vars, np.nan)
        rd = csv.reader(io.StringIO(text))
        header = next(rd, None)
        if header is None or [h.strip() for h in header] != ["pauli_string", "value"]:
            raise ValueError("expected header 'pauli_string,value'")
        for lineno, row in enumerate(rd, 2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"line {lineno}: expected two columns")
            op = parse_operator(row[0])
            (s,) = list(op) if len(op) else [PauliString()]
            v = self.var_of(s)
            if v >= 0:
                vals[v] = float(row[1])
        if np.isnan(vals).any():
            missing = [self.representatives[i].label() for i in np.nonzero(np.isnan(vals))[0][:3]]
            raise ValueError(f"assignment missing moments, e.g. {missing}")
        return self.with_values(vals)
