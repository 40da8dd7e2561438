"""Pauli-string operators on finite subsets of Z^D.

A :class:`PauliString` is a sorted tuple of ``(coordinate, letter)`` pairs and
a :class:`PauliOperator` is a sparse complex combination of strings.  Both are
immutable and hashable.

Text form (also accepted by :func:`parse_operator`)::

    (-1,0) Z0 Z1 + (0.5,0) X0

Each term is an optional coefficient (``(re,im)`` or a bare float) followed by
site letters.  One-dimensional coordinates are written as integers (``Z-1``),
higher-dimensional ones as tuples (``Z(0,1)``).  The identity is ``I``.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from . import kernels

DROP_TOL = 1e-14

LETTERS = ("X", "Y", "Z")

# (a, b) -> (phase, letter) with a*b = phase * letter; "" is the identity
_SITE_PRODUCT = {
    ("X", "X"): (1, ""),
    ("Y", "Y"): (1, ""),
    ("Z", "Z"): (1, ""),
    ("X", "Y"): (1j, "Z"),
    ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"),
    ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"),
    ("X", "Z"): (-1j, "Y"),
}

_LETTER_BITS = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


class PauliString(tuple):
    """Sorted tuple of ``(coord, letter)`` with identity letters omitted."""

    __slots__ = ()

    def __new__(cls, sites: Iterable = ()):
        items = []
        for coord, letter in sites:
            if letter == "I":
                continue
            if letter not in LETTERS:
                raise ValueError(f"unknown Pauli letter {letter!r}")
            items.append((_as_coord(coord), letter))
        items.sort()
        for a, b in zip(items, items[1:]):
            if a[0] == b[0]:
                raise ValueError(f"duplicate site {a[0]} in Pauli string")
        return super().__new__(cls, items)

    @classmethod
    def _trusted(cls, items) -> "PauliString":
        return super().__new__(cls, items)

    @property
    def support(self) -> frozenset:
        return frozenset(c for c, _ in self)

    @property
    def n_y(self) -> int:
        return sum(1 for _, letter in self if letter == "Y")

    def translate(self, shift) -> "PauliString":
        shift = _as_coord(shift)
        return PauliString._trusted(
            [(tuple(a + b for a, b in zip(c, shift)), letter) for c, letter in self]
        )

    def __mul__(self, other: "PauliString"):
        """Return ``(phase, string)`` with ``self * other = phase * string``."""
        phase = 1
        out = []
        i = j = 0
        while i < len(self) and j < len(other):
            (ca, la), (cb, lb) = self[i], other[j]
            if ca < cb:
                out.append(self[i])
                i += 1
            elif cb < ca:
                out.append(other[j])
                j += 1
            else:
                ph, letter = _SITE_PRODUCT[la, lb]
                phase *= ph
                if letter:
                    out.append((ca, letter))
                i += 1
                j += 1
        out.extend(self[i:])
        out.extend(other[j:])
        return phase, PauliString._trusted(out)

    def label(self) -> str:
        if not self:
            return "I"
        return " ".join(f"{letter}{_format_coord(c)}" for c, letter in self)

    def __repr__(self) -> str:
        return f"PauliString({self.label()!r})"


def _as_coord(c) -> tuple:
    if isinstance(c, (int, np.integer)):
        return (int(c),)
    return tuple(int(v) for v in c)


def _format_coord(c: tuple) -> str:
    if len(c) == 1:
        return str(c[0])
    return "(" + ",".join(str(v) for v in c) + ")"


class PauliOperator:
    """Complex linear combination of Pauli strings (immutable)."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping | Iterable | None = None, tol: float = DROP_TOL):
        acc: dict[PauliString, complex] = {}
        if terms is not None:
            items = terms.items() if isinstance(terms, Mapping) else terms
            for s, c in items:
                if not isinstance(s, PauliString):
                    s = PauliString(s)
                acc[s] = acc.get(s, 0) + complex(c)
        self._terms = {s: c for s, c in acc.items() if abs(c) >= tol}
        self._hash = None

    # construction helpers
    @classmethod
    def identity(cls, coef=1.0) -> "PauliOperator":
        return cls({PauliString(): coef})

    @classmethod
    def string(cls, sites, coef=1.0) -> "PauliOperator":
        return cls({PauliString(sites): coef})

    @property
    def terms(self) -> Mapping[PauliString, complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coefficient(self, s) -> complex:
        if not isinstance(s, PauliString):
            s = PauliString(s)
        return self._terms.get(s, 0j)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    @property
    def support(self) -> frozenset:
        out = set()
        for s in self._terms:
            out.update(s.support)
        return frozenset(out)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self._terms.values())

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        # Pauli strings are self-adjoint, so Hermitian <=> real coefficients
        return all(abs(c.imag) <= tol for c in self._terms.values())

    # algebra
    def __add__(self, other):
        other = _coerce(other)
        acc = dict(self._terms)
        for s, c in other._terms.items():
            acc[s] = acc.get(s, 0) + c
        return PauliOperator(acc)

    __radd__ = __add__

    def __neg__(self):
        return PauliOperator({s: -c for s, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, PauliOperator):
            return multiply(self, other)
        if isinstance(other, (int, float, complex, np.number)):
            return PauliOperator({s: c * other for s, c in self._terms.items()})
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self * other
        return NotImplemented

    def __truediv__(self, other):
        return self * (1.0 / other)

    def adjoint(self) -> "PauliOperator":
        return adjoint(self)

    def translate(self, shift) -> "PauliOperator":
        return translate(self, shift)

    def to_dense(self, window) -> np.ndarray:
        return to_dense(self, window)

    def close_to(self, other, tol: float = 1e-12) -> bool:
        diff = self - _coerce(other)
        return all(abs(c) <= tol for c in diff._terms.values())

    def __eq__(self, other):
        if isinstance(other, (int, float, complex)):
            other = _coerce(other)
        if not isinstance(other, PauliOperator):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __str__(self) -> str:
        return format_operator(self)

    def __repr__(self) -> str:
        return f"PauliOperator({format_operator(self)!r})"


def _coerce(x) -> PauliOperator:
    if isinstance(x, PauliOperator):
        return x
    if isinstance(x, PauliString):
        return PauliOperator({x: 1.0})
    if isinstance(x, (int, float, complex, np.number)):
        return PauliOperator.identity(x)
    raise TypeError(f"cannot interpret {type(x).__name__} as a PauliOperator")


def multiply(lhs: PauliOperator, rhs: PauliOperator) -> PauliOperator:
    acc: dict[PauliString, complex] = {}
    for sa, ca in lhs.items():
        for sb, cb in rhs.items():
            ph, s = sa * sb
            acc[s] = acc.get(s, 0) + ca * cb * ph
    return PauliOperator(acc)


def commutator(a: PauliOperator, b: PauliOperator) -> PauliOperator:
    acc: dict[PauliString, complex] = {}
    sup_b = b.support
    for sa, ca in a.items():
        if not (sa.support & sup_b):
            continue
        for sb, cb in b.items():
            ph1, s = sa * sb
            ph2, _ = sb * sa
            d = ph1 - ph2
            if d != 0:
                acc[s] = acc.get(s, 0) + ca * cb * d
    return PauliOperator(acc)


def adjoint(a: PauliOperator) -> PauliOperator:
    return PauliOperator({s: c.conjugate() for s, c in a.items()})


def translate(a: PauliOperator, shift) -> PauliOperator:
    return PauliOperator({s.translate(shift): c for s, c in a.items()})


def hs_inner(a: PauliOperator, b: PauliOperator) -> complex:
    """Normalized trace pairing ``tr(a^dagger b) / dim``."""
    return complex(sum(c.conjugate() * b.coefficient(s) for s, c in a.items()))


def encode(a: PauliOperator, window) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bit encoding ``(x, z, coef)`` of ``a`` relative to an ordered site list."""
    index = {_as_coord(c): j for j, c in enumerate(window)}
    xs, zs, cs = [], [], []
    for s, c in a.items():
        x = z = 0
        for coord, letter in s:
            try:
                j = index[coord]
            except KeyError:
                raise ValueError(
                    f"operator support {sorted(a.support)} is not inside window"
                ) from None
            bx, bz = _LETTER_BITS[letter]
            x |= bx << j
            z |= bz << j
        xs.append(x)
        zs.append(z)
        cs.append(c)
    return (
        np.array(xs, dtype=np.int64),
        np.array(zs, dtype=np.int64),
        np.array(cs, dtype=np.complex128),
    )


def decode(x: int, z: int, window) -> PauliString:
    items = []
    for j, coord in enumerate(window):
        bx = (x >> j) & 1
        bz = (z >> j) & 1
        if bx or bz:
            items.append((_as_coord(coord), "Y" if bx and bz else ("X" if bx else "Z")))
    return PauliString(items)


def to_sparse(a: PauliOperator, window) -> sp.csr_matrix:
    window = [_as_coord(c) for c in window]
    n = len(window)
    xs, zs, cs = encode(a, window)
    size = 1 << n
    if len(xs) == 0:
        return sp.csr_matrix((size, size), dtype=np.complex128)
    rows, cols, vals = kernels.pauli_sparse(xs, zs, cs, n)
    return sp.csr_matrix((vals, (rows, cols)), shape=(size, size))


def to_dense(a: PauliOperator, window) -> np.ndarray:
    """Kronecker-product matrix of ``a`` with sites in the listed order."""
    return to_sparse(a, window).toarray()


def from_dense(m: np.ndarray, window, tol: float = DROP_TOL) -> PauliOperator:
    """Pauli expansion of a dense ``2**n`` matrix on the listed sites."""
    window = [_as_coord(c) for c in window]
    n = len(window)
    size = 1 << n
    # coefficient of P is tr(P m) / 2**n; pauli_expectations gives tr(m P)
    e = kernels.pauli_expectations(np.asarray(m, dtype=np.complex128)) / size
    xs, zs = np.nonzero(np.abs(e) >= tol)
    return PauliOperator(
        {decode(int(x), int(z), window): e[x, z] for x, z in zip(xs, zs)}, tol=tol
    )


# text form ------------------------------------------------------------------

_SITE_RE = re.compile(r"([XYZ])(\(\s*-?\d+(?:\s*,\s*-?\d+)*\s*\)|-?\d+)$")
_COEF_RE = re.compile(r"\(\s*([^,()]+)\s*,\s*([^,()]+)\s*\)$")


def _fmt_num(v: float) -> str:
    v = float(v)
    if v == 0:
        return "0"
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def format_operator(a: PauliOperator) -> str:
    if len(a) == 0:
        return "(0,0) I"
    parts = []
    for s, c in sorted(a.items(), key=lambda kv: (len(kv[0]), kv[0])):
        parts.append(f"({_fmt_num(c.real)},{_fmt_num(c.imag)}) {s.label()}")
    return " + ".join(parts)


def _split_terms(text: str) -> list[str]:
    # split on '+' outside parentheses
    out, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "+" and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return out


def _tokenize(term: str) -> list[str]:
    toks, depth, cur = [], 0, []
    for ch in term:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch.isspace() and depth == 0:
            if cur:
                toks.append("".join(cur))
                cur = []
        else:
            cur.append(ch)
    if cur:
        toks.append("".join(cur))
    return toks


def parse_site(tok: str) -> tuple[tuple, str]:
    m = _SITE_RE.match(tok)
    if not m:
        raise ValueError(f"cannot parse site token {tok!r}")
    letter, coord = m.groups()
    if coord.startswith("("):
        c = tuple(int(v) for v in coord.strip("()").split(","))
    else:
        c = (int(coord),)
    return c, letter


def parse_coefficient(tok: str) -> complex:
    m = _COEF_RE.match(tok)
    if m:
        return complex(float(m.group(1)), float(m.group(2)))
    return complex(tok.replace("i", "j")) if "i" in tok else complex(float(tok))


def parse_operator(text: str) -> PauliOperator:
    """Parse the text form produced by :func:`format_operator`."""
    text = text.strip()
    if not text:
        raise ValueError("empty operator string")
    acc: dict[PauliString, complex] = {}
    for term in _split_terms(text):
        toks = _tokenize(term.strip())
        if not toks:
            raise ValueError(f"empty term in {text!r}")
        coef = 1.0 + 0j
        if not _SITE_RE.match(toks[0]) and toks[0] != "I":
            coef = parse_coefficient(toks[0])
            toks = toks[1:]
        sites = [parse_site(t) for t in toks if t != "I"]
        s = PauliString(sites)
        acc[s] = acc.get(s, 0) + coef
    return PauliOperator(acc)
