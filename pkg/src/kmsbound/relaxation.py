"""Convex relaxation of the set of translation-invariant equilibrium states.

For a moment functional ``w`` on a window ``W`` the program imposes

* ``w(1) = 1`` (pinned);
* positivity of the window state ``rho = 2^-n sum_P w(P) P`` (equivalently of
  the full Pauli-basis moment matrix) or of a configurable sub-window;
* translation invariance (variable identification);
* stationarity ``w([H, a]) = 0`` for every ``a`` in the EEB basis;
* the matrix energy-entropy balance ``D_op(A||B) <= beta C`` with

      A_ij = w(a_i^dagger a_j),  B_ij = w(a_j a_i^dagger),  C_ij = w(a_i^dagger [H, a_j])

  relaxed to ``D^[m](A||B) <= beta C``; at ``beta = inf`` the constraint is
  ``C >= 0``.

The EEB basis is the Pauli basis of ``eeb_window``.  Its default is every
site whose interaction neighbourhood stays inside ``W``, so that all
commutators ``[H, a_j]`` are evaluable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .conic import ConicProgram, ProgramBuilder
from .dop import emit_dop_m_constraint, scalar_dop_m
from .lattice import InteractionSpec, Window, commutator_with_h, extend_boundary
from .moments import AffineMatrix, MomentFunctional
from .pauli import PauliOperator, PauliString, _as_coord, decode, encode

INF = math.inf


@dataclass(frozen=True)
class RelaxationConfig:
    objective: PauliOperator
    ell: int | None = 1
    window: Window | None = None
    eeb_window: Window | None = None
    lmom: int | None = None
    moment_window: Window | None = None
    beta: float = INF
    m: int = 3
    moment_floor: float | None = None
    sense: str = "min"
    real: bool | None = None
    moment_form: str = "density"

    def __post_init__(self):
        if not (self.beta >= 0):
            raise ValueError("beta must be nonnegative (inf for ground states)")
        if self.m < 0:
            raise ValueError("m must be nonnegative")
        if self.moment_floor is not None and not (0 < self.moment_floor < 1):
            raise ValueError("moment_floor must lie in (0, 1)")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        if self.moment_form not in ("density", "pauli"):
            raise ValueError("moment_form must be 'density' or 'pauli'")
        if self.window is None and self.ell is None:
            raise ValueError("give either ell or an explicit window")

    def resolve_window(self, dim: int) -> Window:
        return self.window if self.window is not None else Window.box(self.ell, dim)


def default_eeb_window(spec: InteractionSpec, w: Window) -> Window | None:
    """Sites whose boundary extension stays inside ``w``."""
    sites = [s for s in w.sites if extend_boundary(spec, Window((s,))).site_set <= w.site_set]
    return Window(tuple(sites)) if sites else None


def resolve_moment_sites(cfg: RelaxationConfig, w: Window) -> tuple:
    if cfg.moment_window is not None:
        mw = cfg.moment_window
        if not mw.site_set <= w.site_set:
            raise ValueError("moment window must lie inside the window")
        return mw.sites
    if cfg.lmom is None:
        return w.sites
    if not (1 <= cfg.lmom <= w.n_sites):
        raise ValueError(f"lmom must be between 1 and {w.n_sites}")
    return w.sites[: cfg.lmom]


def basis_bits(f: MomentFunctional, sites) -> tuple[np.ndarray, np.ndarray]:
    """All ``4^k`` Pauli strings on ``sites`` in window bits; index ``z_loc 2^k + x_loc``."""
    bits = f.encode_sub(sites)
    k = len(bits)
    loc = np.arange(1 << k, dtype=np.int64)
    glob = np.zeros_like(loc)
    for j, b in enumerate(bits):
        glob |= ((loc >> j) & 1) << b
    xs = np.tile(glob, 1 << k)
    zs = np.repeat(glob, 1 << k)
    return xs, zs


def real_frame(xs, zs) -> np.ndarray:
    """Diagonal unitary ``u_i = i`` for strings with an odd number of ``Y``."""
    odd = kernels.popcount(np.asarray(xs) & np.asarray(zs)) & 1
    return np.where(odd == 1, 1j, 1.0 + 0j)


@dataclass
class EEBTriple:
    """EEB matrices as affine expressions in the frame ``u`` (``M_frame = U M U^dagger``)."""

    A: AffineMatrix
    B: AffineMatrix
    C: AffineMatrix
    u: np.ndarray
    basis: list = field(default_factory=list)

    def numeric(self, values) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Dense ``A, B, C`` in the plain Pauli basis at an assignment."""
        ud = self.u.conj()

        def back(m):
            return ud[:, None] * m.value(values) * ud.conj()[None, :]

        return back(self.A), back(self.B), back(self.C)


def eeb_triple(spec: InteractionSpec, cfg: RelaxationConfig, f: MomentFunctional, eeb_sites=None) -> EEBTriple:
    """``A, B`` and the Hermitian part of ``C`` over the Pauli basis of the EEB window."""
    w = f.window
    if eeb_sites is None:
        ew = cfg.eeb_window or default_eeb_window(spec, w)
        if ew is None:
            raise ValueError("window too small for any EEB site")
        eeb_sites = ew.sites
    eeb_sites = tuple(_as_coord(s) for s in eeb_sites)
    # an empty site list gives the basis {I}
    if eeb_sites and not extend_boundary(spec, Window(eeb_sites)).site_set <= w.site_set:
        raise ValueError("EEB window commutators escape the moment window")
    xs, zs = basis_bits(f, eeb_sites)
    A = f.string_gram(xs, zs, xs, zs)
    B = AffineMatrix(A.size, A.cols, A.rows, A.vars, A.coefs)  # B_ij = w(P_j P_i)
    rows, cols, vars, coefs = [], [], [], []
    for j in range(len(xs)):
        pj = decode(int(xs[j]), int(zs[j]), w.sites)
        comm = commutator_with_h(spec, PauliOperator({pj: 1.0}))
        if len(comm) == 0:
            continue
        cx, cz, cc = encode(comm, w.sites)
        g = f.string_gram(xs, zs, cx, cz)
        rows.append(g.rows)
        cols.append(np.full(len(g.rows), j))
        vars.append(g.vars)
        coefs.append(g.coefs * cc[g.cols])
    if rows:
        C = AffineMatrix(len(xs), np.concatenate(rows), np.concatenate(cols), np.concatenate(vars), np.concatenate(coefs))
    else:
        C = AffineMatrix(len(xs), [], [], [], [])
    C = C.hermitian_part()
    u = real_frame(xs, zs) if f.real else np.ones(len(xs), dtype=complex)
    basis = [decode(int(a), int(b), w.sites) for a, b in zip(xs, zs)]
    return EEBTriple(
        A.conjugate_diag(u).compress(),
        B.conjugate_diag(u).compress(),
        C.conjugate_diag(u).compress(),
        u,
        basis,
    )


def stationarity_rows(spec: InteractionSpec, f: MomentFunctional, sites) -> list[tuple[np.ndarray, np.ndarray]]:
    """Deduplicated real linear rows of ``w([H, P]) = 0`` for strings ``P`` on ``sites``."""
    w = f.window
    xs, zs = basis_bits(f, sites)
    seen = set()
    out = []
    for x, z in zip(xs[1:], zs[1:]):
        p = decode(int(x), int(z), w.sites)
        form = f.evaluate(commutator_with_h(spec, PauliOperator({p: 1.0})))
        for part in (form.real, form.imag):
            part = part.compress(1e-13)
            if len(part.vars) == 0:
                if abs(part.const) > 1e-12:
                    raise ValueError("stationarity forces a nonzero constant to vanish")
                continue
            c = part.coefs.real
            s = c[np.argmax(np.abs(c))]
            key = (tuple(part.vars), tuple(np.round(c / s, 11)), round(part.const.real / s, 11))
            if key in seen:
                continue
            seen.add(key)
            out.append((part.vars, c, -part.const.real))
    return out


@dataclass
class Relaxation:
    """A built relaxation: the program (minimizing ``w(O)``) and its pieces."""

    program: ConicProgram
    functional: MomentFunctional
    triple: EEBTriple | None
    objective_form: tuple
    eeb_sites: tuple
    moment_sites: tuple
    n_moment_vars: int

    def moments_of(self, x) -> MomentFunctional:
        return self.functional.with_values(np.asarray(x)[: self.n_moment_vars])


def use_real_mode(spec: InteractionSpec, obj: PauliOperator) -> bool:
    return spec.is_real() and obj.is_hermitian() and all(s.n_y % 2 == 0 for s in obj)


def build_relaxation(spec: InteractionSpec, cfg: RelaxationConfig) -> Relaxation:
    w = cfg.resolve_window(spec.dim)
    obj = cfg.objective
    if not w.contains_support(obj):
        raise ValueError("objective support lies outside the window")
    if not obj.is_hermitian():
        raise ValueError("objective must be Hermitian")
    real = use_real_mode(spec, obj) if cfg.real is None else cfg.real
    if real and not spec.is_real():
        raise ValueError("real mode requires a Hamiltonian without odd-Y terms")
    f = MomentFunctional(w, real=real)
    pb = ProgramBuilder(f.n_vars)

    # positivity
    msites = resolve_moment_sites(cfg, w)
    if cfg.moment_form == "density":
        pb.add_psd(f.density_matrix(msites), "moments")
    else:
        xs, zs = basis_bits(f, msites)
        mm = f.string_gram(xs, zs, xs, zs)
        if real:
            mm = mm.conjugate_diag(real_frame(xs, zs))
        pb.add_psd(mm, "moments")

    # EEB and stationarity
    ew = cfg.eeb_window or default_eeb_window(spec, w)
    triple = None
    eeb_sites = ()
    if ew is not None:
        eeb_sites = ew.sites
        for vars, coefs, rhs in stationarity_rows(spec, f, eeb_sites):
            pb.add_equality(vars, coefs, rhs)
        triple = eeb_triple(spec, cfg, f, eeb_sites)
        A, B, C = triple.A, triple.B, triple.C
        if math.isinf(cfg.beta):
            pb.add_psd(C, "eeb_ground")
        else:
            em = emit_dop_m_constraint(A, B, C * cfg.beta, cfg.m, pb.n_vars, hermitian=not real)
            pb.new_vars(em.n_new_vars)
            for k, blk in enumerate(em.blocks):
                pb.add_psd(blk, f"eeb_{k}")
        if cfg.moment_floor is not None:
            floor = AffineMatrix.identity(A.size, cfg.moment_floor)
            pb.add_psd(A - floor, "floor_A")
            pb.add_psd(B - floor, "floor_B")

    form = f.evaluate(obj)
    sign = 1.0 if cfg.sense == "min" else -1.0
    pb.set_objective(form.vars, sign * form.coefs.real, sign * form.const.real)
    pb.meta.update(
        window=w.sites, eeb_window=eeb_sites, moment_sites=msites, beta=cfg.beta,
        m=cfg.m, real=real, sense=cfg.sense,
    )
    return Relaxation(pb.build(), f, triple, (form.vars, form.coefs.real, form.const.real), eeb_sites, msites, f.n_vars)


def build(spec: InteractionSpec, cfg: RelaxationConfig) -> ConicProgram:
    """Program minimizing ``w(O)`` (``sense='min'``) or ``-w(O)`` (``'max'``)."""
    return build_relaxation(spec, cfg).program


# scalar EEB validator ----------------------------------------------------------


@dataclass
class ScalarEEBReport:
    max_violation: float
    violations: np.ndarray
    worst: int
    lhs: np.ndarray
    rhs: np.ndarray

    def passed(self, tol: float = 1e-6) -> bool:
        return self.max_violation <= tol


def _xlogxy(x: float, y: float) -> float:
    if x <= 0:
        return 0.0
    if y <= 0:
        return INF
    return x * math.log(x / y)


def scalar_eeb_check(
    spec: InteractionSpec,
    beta: float,
    f: MomentFunctional,
    samples,
    m: int | None = None,
) -> ScalarEEBReport:
    """Largest ``lhs - rhs`` of the scalar EEB inequality over ``samples``.

    ``lhs = w(a^dag a) log(w(a^dag a) / w(a a^dag))`` (or its level-``m``
    counterpart ``2^m (x - x^(1-2^-m) y^(2^-m))``) and ``rhs = beta w(a^dag [H, a])``.
    At ``beta = inf`` the inequality reads ``w(a^dag [H, a]) >= 0``.
    """
    if f.values is None:
        raise ValueError("functional has no assignment")
    wsites = f.window.sites
    vals = f.values
    lhs, rhs = [], []
    for a in samples:
        if not f.window.contains_support(a):
            raise ValueError("sample escapes the window")
        xs, zs, v = encode(a, wsites)
        g = f.string_gram(xs, zs, xs, zs).value(vals)
        x = float(np.real(v.conj() @ g @ v))
        y = float(np.real(v @ g @ v.conj()))
        comm = commutator_with_h(spec, a)
        if len(comm):
            if not f.window.contains_support(comm):
                raise ValueError("commutator of a sample escapes the window")
            cx, cz, cv = encode(comm, wsites)
            gram = f.string_gram(xs, zs, cx, cz).value(vals, (len(xs), len(cx)))
            z = complex(v.conj() @ gram @ cv).real
        else:
            z = 0.0
        if math.isinf(beta):
            lhs.append(0.0)
            rhs.append(z)
        else:
            x, y = max(x, 0.0), max(y, 0.0)
            lhs.append(_xlogxy(x, y) if m is None else scalar_dop_m(x, y, m))
            rhs.append(beta * z)
    lhs = np.array(lhs)
    rhs = np.array(rhs)
    viol = lhs - rhs
    if len(viol) == 0:
        return ScalarEEBReport(0.0, viol, -1, lhs, rhs)
    k = int(np.argmax(viol))
    return ScalarEEBReport(float(viol[k]), viol, k, lhs, rhs)


def random_span_samples(sites, n: int, rng: np.random.Generator, real: bool = False) -> list[PauliOperator]:
    """Random operators ``sum_i c_i P_i`` over the Pauli basis of ``sites`` (unit norm)."""
    sites = [_as_coord(s) for s in sites]
    k = len(sites)
    strings = []
    for code in range(4**k):
        items = []
        for j, s in enumerate(sites):
            letter = "IXYZ"[(code >> (2 * j)) & 3]
            if letter != "I":
                items.append((s, letter))
        strings.append(PauliString(items))
    out = []
    for _ in range(n):
        c = rng.normal(size=len(strings))
        if not real:
            c = c + 1j * rng.normal(size=len(strings))
        c /= np.linalg.norm(c)
        out.append(PauliOperator(dict(zip(strings, c))))
    return out
