"""Translation-invariant finite-range spin Hamiltonians and finite windows.

A model is a list of interaction terms anchored near the origin cell; the
formal Hamiltonian is the sum of all their lattice translates.  Windows are
explicit finite site lists, sorted lexicographically.

Model file format::

    # transverse-field Ising
    dim 1 range 1
    param g 1.0
    term -1 Z0 Z1
    term -1*g X0

Coefficients are a float, a parameter name, or ``<float>*<param>``.
Two-dimensional coordinates are written ``Z(0,1)``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .pauli import (
    PauliOperator,
    PauliString,
    _as_coord,
    commutator,
    parse_site,
    translate,
)


class ModelParseError(ValueError):
    def __init__(self, msg: str, line: int | None = None, source: str = "<model>"):
        self.line = line
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + msg)


@dataclass(frozen=True)
class Window:
    """Finite, lexicographically sorted list of lattice sites."""

    sites: tuple
    level: int | None = None

    def __post_init__(self):
        sites = tuple(sorted({_as_coord(s) for s in self.sites}))
        if not sites:
            raise ValueError("window must be nonempty")
        dims = {len(s) for s in sites}
        if len(dims) != 1:
            raise ValueError("window sites have mixed dimensions")
        object.__setattr__(self, "sites", sites)

    @classmethod
    def box(cls, ell: int, dim: int = 1) -> "Window":
        """Hyper-rectangle ``{-ell..ell}^dim``."""
        if ell < 0:
            raise ValueError("ell must be nonnegative")
        rng = range(-ell, ell + 1)
        return cls(tuple(itertools.product(rng, repeat=dim)), level=ell)

    @classmethod
    def interval(cls, lo: int, hi: int) -> "Window":
        return cls(tuple((i,) for i in range(lo, hi + 1)))

    @property
    def dim(self) -> int:
        return len(self.sites[0])

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    def __len__(self) -> int:
        return len(self.sites)

    def __iter__(self):
        return iter(self.sites)

    def __contains__(self, site) -> bool:
        return _as_coord(site) in self.site_set

    @cached_property
    def site_set(self) -> frozenset:
        return frozenset(self.sites)

    @cached_property
    def index(self) -> dict:
        return {s: j for j, s in enumerate(self.sites)}

    def contains_support(self, a) -> bool:
        sup = a.support if hasattr(a, "support") else frozenset(a)
        return sup <= self.site_set

    def translate(self, shift) -> "Window":
        shift = _as_coord(shift)
        return Window(tuple(tuple(a + b for a, b in zip(s, shift)) for s in self.sites))

    def label(self) -> str:
        if self.level is not None:
            return f"box(ell={self.level}, dim={self.dim})"
        return "{" + ", ".join(",".join(map(str, s)) for s in self.sites) + "}"


def as_window(w, dim: int = 1) -> Window:
    if isinstance(w, Window):
        return w
    if isinstance(w, (int, np.integer)):
        return Window.box(int(w), dim)
    return Window(tuple(w))


@dataclass(frozen=True)
class Term:
    """One interaction term ``coef * param * string`` (``param`` may be None)."""

    coef: float
    param: str | None
    string: PauliString


@dataclass(frozen=True)
class InteractionSpec:
    dim: int
    range: int
    raw_terms: tuple = ()
    params: tuple = ()  # sorted (name, value) pairs
    name: str = "model"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.range < 0:
            raise ValueError("range must be nonnegative")
        names = dict(self.params)
        for t in self.raw_terms:
            if not t.string:
                raise ValueError("constant (identity) terms are not allowed")
            for c in t.string.support:
                if len(c) != self.dim:
                    raise ValueError(f"term site {c} does not match dim {self.dim}")
                if max(abs(v) for v in c) > self.range:
                    raise ValueError(
                        f"term {t.string.label()} leaves the range-{self.range} ball"
                    )
            if t.param is not None and t.param not in names:
                raise ValueError(f"unknown parameter {t.param!r}")
            if not np.isfinite(t.coef):
                raise ValueError("term coefficients must be finite")

    @classmethod
    def from_terms(cls, dim: int, range_: int, terms, params=None, name="model"):
        """Build from ``(coef, param_or_None, sites)`` triples or PauliOperators."""
        raw = []
        for t in terms:
            if isinstance(t, Term):
                raw.append(t)
            elif isinstance(t, PauliOperator):
                for s, c in t.items():
                    if abs(c.imag) > 1e-12:
                        raise ValueError("interaction terms must be Hermitian")
                    raw.append(Term(float(c.real), None, s))
            else:
                coef, param, sites = t
                s = sites if isinstance(sites, PauliString) else PauliString(sites)
                raw.append(Term(float(coef), param, s))
        return cls(dim, range_, tuple(raw), tuple(sorted((params or {}).items())), name)

    def with_params(self, **values) -> "InteractionSpec":
        p = dict(self.params)
        for k, v in values.items():
            if k not in p:
                raise KeyError(f"unknown parameter {k!r}")
            p[k] = float(v)
        return replace(self, params=tuple(sorted(p.items())))

    def param(self, name: str) -> float:
        return dict(self.params)[name]

    @cached_property
    def terms(self) -> tuple:
        """Resolved interaction terms, one PauliOperator per distinct support."""
        vals = dict(self.params)
        grouped: dict[frozenset, dict] = {}
        for t in self.raw_terms:
            c = t.coef * (vals[t.param] if t.param is not None else 1.0)
            g = grouped.setdefault(t.string.support, {})
            g[t.string] = g.get(t.string, 0.0) + c
        out = []
        for sup in sorted(grouped, key=lambda s: sorted(s)):
            op = PauliOperator(grouped[sup])
            if len(op):
                out.append(op)
        return tuple(out)

    @cached_property
    def term_supports(self) -> tuple:
        return tuple(tuple(sorted(t.support)) for t in self.terms)

    @cached_property
    def is_commuting(self) -> bool:
        return _check_commuting(self)

    def is_real(self) -> bool:
        """True when every term has an even number of Y letters."""
        return all(s.n_y % 2 == 0 for t in self.terms for s in t)


def _shifts_touching(sup, target):
    # all x with (sup + x) meeting target
    out = set()
    for s in target:
        for c in sup:
            out.add(tuple(a - b for a, b in zip(s, c)))
    return sorted(out)


def _translates(spec: InteractionSpec, w: Window, inside: bool):
    sset = w.site_set
    for t, sup in zip(spec.terms, spec.term_supports):
        for x in _shifts_touching(sup, w.sites):
            moved = [tuple(a + b for a, b in zip(c, x)) for c in sup]
            if inside and not all(m in sset for m in moved):
                continue
            yield t, x, moved


def h_window(spec: InteractionSpec, w) -> PauliOperator:
    """Sum of translated terms fully supported in ``w``."""
    w = as_window(w, spec.dim)
    acc = PauliOperator()
    for t, x, _ in _translates(spec, w, inside=True):
        acc = acc + translate(t, x)
    return acc


def h_tilde_window(spec: InteractionSpec, w) -> PauliOperator:
    """Sum of translated terms whose support meets ``w``."""
    w = as_window(w, spec.dim)
    acc = PauliOperator()
    for t, x, _ in _translates(spec, w, inside=False):
        acc = acc + translate(t, x)
    return acc


def extend_boundary(spec: InteractionSpec, w) -> Window:
    w = as_window(w, spec.dim)
    sites = set(w.sites)
    for _, _, moved in _translates(spec, w, inside=False):
        sites.update(moved)
    return Window(tuple(sites))


def surface_term(spec: InteractionSpec, w) -> PauliOperator:
    """Terms that meet ``w`` without being contained in it."""
    return h_tilde_window(spec, w) - h_window(spec, w)


def commutator_with_h(spec: InteractionSpec, a: PauliOperator) -> PauliOperator:
    """Formal ``[H, a]`` for finitely supported ``a``."""
    if not a.support:
        return PauliOperator()
    return commutator(h_tilde_window(spec, Window(tuple(a.support))), a)


def window_terms(spec: InteractionSpec, w) -> list[PauliOperator]:
    """Every translated term ``h_X`` with ``X`` inside ``w``."""
    w = as_window(w, spec.dim)
    return [translate(t, x) for t, x, _ in _translates(spec, w, inside=True)]


def _check_commuting(spec: InteractionSpec) -> bool:
    for i, (ti, si) in enumerate(zip(spec.terms, spec.term_supports)):
        for tj, sj in zip(spec.terms[i:], spec.term_supports[i:]):
            for x in _shifts_touching(sj, si):
                if not commutator(ti, translate(tj, x)).is_zero(1e-12):
                    return False
    return True


# model files --------------------------------------------------------------

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


def _parse_coef(tok: str, params: dict, lineno: int, source: str):
    parts = tok.split("*")
    if len(parts) > 2:
        raise ModelParseError(f"bad coefficient {tok!r}", lineno, source)
    coef, param = 1.0, None
    for p in parts:
        neg = p.startswith("-") and _NAME_RE.match(p[1:])
        name = p[1:] if neg else p
        if _NAME_RE.match(name):
            if param is not None:
                raise ModelParseError(f"two parameters in {tok!r}", lineno, source)
            if name not in params:
                raise ModelParseError(f"unknown parameter {name!r}", lineno, source)
            param = name
            if neg:
                coef = -coef
        else:
            try:
                coef *= float(p)
            except ValueError:
                raise ModelParseError(f"bad coefficient {tok!r}", lineno, source) from None
    return coef, param


def parse_model(text: str, source: str = "<model>", name: str | None = None):
    dim = rng = None
    params: dict[str, float] = {}
    terms = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        kw = toks[0]
        if kw == "dim":
            if len(toks) != 4 or toks[2] != "range":
                raise ModelParseError("expected 'dim <D> range <r>'", lineno, source)
            try:
                dim, rng = int(toks[1]), int(toks[3])
            except ValueError:
                raise ModelParseError("dim and range must be integers", lineno, source) from None
        elif kw == "param":
            if len(toks) != 3 or not _NAME_RE.match(toks[1]):
                raise ModelParseError("expected 'param <name> <float>'", lineno, source)
            try:
                params[toks[1]] = float(toks[2])
            except ValueError:
                raise ModelParseError(f"bad parameter value {toks[2]!r}", lineno, source) from None
        elif kw == "term":
            if dim is None:
                raise ModelParseError("'term' before the 'dim' header", lineno, source)
            if len(toks) < 3:
                raise ModelParseError("term needs a coefficient and sites", lineno, source)
            coef, param = _parse_coef(toks[1], params, lineno, source)
            try:
                s = PauliString(parse_site(t) for t in toks[2:])
            except ValueError as exc:
                raise ModelParseError(str(exc), lineno, source) from None
            terms.append(Term(coef, param, s))
        else:
            raise ModelParseError(f"unknown directive {kw!r}", lineno, source)
    if dim is None:
        raise ModelParseError("missing 'dim <D> range <r>' header", None, source)
    try:
        return InteractionSpec(
            dim, rng, tuple(terms), tuple(sorted(params.items())), name or "model"
        )
    except ValueError as exc:
        raise ModelParseError(str(exc), None, source) from None


def load_model(path) -> InteractionSpec:
    path = Path(path)
    if not path.exists():
        builtin = Path(__file__).parent / "models" / f"{path.name}.txt"
        if builtin.exists():
            path = builtin
    return parse_model(path.read_text(encoding="utf-8"), str(path), path.stem)


def builtin_models() -> list[str]:
    return sorted(p.stem for p in (Path(__file__).parent / "models").glob("*.txt"))


def tfising(g: float = 1.0) -> InteractionSpec:
    """``H = -sum Z_i Z_{i+1} - g sum X_i``."""
    return load_model("tfising").with_params(g=g)


def classical_ising(h: float = 0.0) -> InteractionSpec:
    """``H = -sum Z_i Z_{i+1} - h sum Z_i``."""
    return load_model("ising").with_params(h=h)


def random_nn_spec(
    rng: np.random.Generator, scale: float = 1.0, real: bool = False
) -> InteractionSpec:
    """Random nearest-neighbour 1D qubit model (two-site and field terms).

    With ``real=True`` only letter pairs with an even number of ``Y`` are drawn.
    """
    letters = "XYZ"
    terms = []
    for a in letters:
        if not (real and a == "Y"):
            terms.append((scale * rng.normal(), None, [((0,), a)]))
        for b in letters:
            if real and (a == "Y") != (b == "Y"):
                continue
            terms.append((scale * rng.normal(), None, [((0,), a), ((1,), b)]))
    return InteractionSpec.from_terms(1, 1, terms, name="random")
