"""Backends for :class:`~kmsbound.conic.ConicProgram`.

Each backend solves the reduced program ``min c.y + c0`` subject to
``f0_j + F_j y`` PSD and reports primal and dual objectives.  Statuses are
mapped to ``optimal``, ``near_optimal``, ``infeasible``, ``unbounded`` or
``solver_error``; a failed solve never carries a bound.

``KMSBOUND_BACKEND`` overrides the default backend (``clarabel``).
"""

from __future__ import annotations

import math
import os
import threading
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .conic import ConicProgram, InfeasibleEqualities, ReducedProgram, reduce_program

OK_STATUSES = ("optimal", "near_optimal")
SQRT2 = math.sqrt(2.0)


@dataclass
class SolveResult:
    status: str
    objective: float = math.nan
    x: np.ndarray | None = None
    gap: float = math.nan
    primal_objective: float = math.nan
    dual_objective: float = math.nan
    backend: str = ""
    message: str = ""
    seconds: float = 0.0
    min_eig: float = math.nan
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in OK_STATUSES


def _svec_index_upper_colmajor(rows, cols):
    # lower entry (r >= c) is the upper entry (c, r) of column r
    return rows * (rows + 1) // 2 + cols


def _svec_index_lower_colmajor(rows, cols, n):
    return cols * n - cols * (cols - 1) // 2 + (rows - cols)


def _stack(red: ReducedProgram, index_fn):
    """Stack all blocks as ``s = b - A y``; 1x1 blocks first (nonnegative cone)."""
    lin = [b for b in red.blocks if b.size == 1]
    psd = [b for b in red.blocks if b.size > 1]
    a_parts, b_parts = [], []
    for blk in lin:
        a_parts.append(-blk.F)
        b_parts.append(blk.f0)
    for blk in psd:
        idx = index_fn(blk.rows, blk.cols, blk.size)
        scale = np.where(blk.rows == blk.cols, 1.0, SQRT2)
        dim = blk.size * (blk.size + 1) // 2
        S = sp.csr_matrix((scale, (idx, np.arange(len(idx)))), shape=(dim, len(idx)))
        a_parts.append(-(S @ blk.F))
        b_parts.append(S @ blk.f0)
    A = sp.vstack(a_parts, format="csc") if a_parts else sp.csc_matrix((0, red.n))
    b = np.concatenate(b_parts) if b_parts else np.zeros(0)
    return A, b, len(lin), [blk.size for blk in psd]


class Backend:
    name = ""
    reentrant = True

    def available(self) -> bool:
        return True

    def solve(self, red: ReducedProgram, tol: float, options: dict) -> SolveResult:
        raise NotImplementedError


class ClarabelBackend(Backend):
    name = "clarabel"
    reentrant = True

    def available(self):
        try:
            import clarabel  # noqa: F401
        except ImportError:
            return False
        return True

    def solve(self, red, tol, options):
        import clarabel

        A, b, n_lin, psd_sizes = _stack(
            red, lambda r, c, n: _svec_index_upper_colmajor(r, c)
        )
        cones = []
        if n_lin:
            cones.append(clarabel.NonnegativeConeT(n_lin))
        cones += [clarabel.PSDTriangleConeT(s) for s in psd_sizes]
        st = clarabel.DefaultSettings()
        st.verbose = bool(options.get("verbose", False))
        st.tol_gap_abs = tol
        st.tol_gap_rel = tol
        st.tol_feas = tol
        st.max_iter = int(options.get("max_iter", 200))
        for k, v in options.items():
            if k not in ("verbose", "max_iter") and hasattr(st, k):
                setattr(st, k, v)
        P = sp.csc_matrix((red.n, red.n))
        solver = clarabel.DefaultSolver(P, red.c, A, b, cones, st)
        sol = solver.solve()
        S = clarabel.SolverStatus
        mapping = {
            S.Solved: "optimal",
            S.AlmostSolved: "near_optimal",
            S.PrimalInfeasible: "infeasible",
            S.AlmostPrimalInfeasible: "infeasible",
            S.DualInfeasible: "unbounded",
            S.AlmostDualInfeasible: "unbounded",
        }
        status = mapping.get(sol.status, "solver_error")
        res = SolveResult(status, backend=self.name, message=str(sol.status))
        if status in OK_STATUSES:
            res.x = np.asarray(sol.x)
            res.primal_objective = float(sol.obj_val)
            res.dual_objective = float(sol.obj_val_dual)
        res.info = {"iterations": int(sol.iterations)}
        return res


class CvxoptBackend(Backend):
    """cvxopt's conelp-based ``solvers.sdp``; global option state, not reentrant."""

    name = "cvxopt"
    reentrant = False

    def available(self):
        try:
            import cvxopt  # noqa: F401
        except ImportError:
            return False
        return True

    def solve(self, red, tol, options):
        from cvxopt import matrix, solvers, spmatrix

        def spm(M):
            M = sp.coo_matrix(M)
            return spmatrix(M.data.tolist(), M.row.tolist(), M.col.tolist(), M.shape)

        lin = [b for b in red.blocks if b.size == 1]
        psd = [b for b in red.blocks if b.size > 1]
        Gl = hl = None
        if lin:
            Gl = spm(-sp.vstack([b.F for b in lin]))
            hl = matrix(np.concatenate([b.f0 for b in lin]).astype(float))
        Gs, hs = [], []
        for blk in psd:
            n = blk.size
            Fc = blk.F.tocoo()
            r, c = blk.rows[Fc.row], blk.cols[Fc.row]
            # fill both triangles of the column-major vec
            rr = np.concatenate([r * 1 + c * n, (c + r * n)[r != c]])
            kk = np.concatenate([Fc.col, Fc.col[r != c]])
            vv = np.concatenate([-Fc.data, -Fc.data[r != c]])
            Gs.append(spm(sp.coo_matrix((vv, (rr, kk)), shape=(n * n, red.n))))
            h = blk.matrix(np.zeros(red.n))
            hs.append(matrix(h))
        opts = {
            "show_progress": bool(options.get("verbose", False)),
            "abstol": tol,
            "reltol": tol,
            "feastol": max(tol, 1e-10),
            "maxiters": int(options.get("max_iter", 100)),
        }
        kw = {"Gs": Gs, "hs": hs} if Gs else {}
        if Gl is not None:
            kw.update(Gl=Gl, hl=hl)
        sol = solvers.sdp(matrix(red.c.astype(float)), options=opts, **kw)
        st = sol["status"]
        res = SolveResult("solver_error", backend=self.name, message=st)
        if st == "optimal":
            res.status = "optimal"
        elif st == "primal infeasible":
            res.status = "infeasible"
        elif st == "dual infeasible":
            res.status = "unbounded"
        elif st == "unknown":
            pinf = sol.get("primal infeasibility") or math.inf
            dinf = sol.get("dual infeasibility") or math.inf
            if max(pinf, dinf) <= 1e-6 and sol.get("x") is not None:
                res.status = "near_optimal"
        if res.status in OK_STATUSES:
            res.x = np.array(sol["x"]).ravel()
            res.primal_objective = float(sol["primal objective"])
            res.dual_objective = float(sol["dual objective"])
        res.info = {"iterations": sol.get("iterations")}
        return res


class ScsBackend(Backend):
    """First-order splitting solver; low accuracy, useful as a cross-check."""

    name = "scs"
    reentrant = True

    def available(self):
        try:
            import scs  # noqa: F401
        except ImportError:
            return False
        return True

    def solve(self, red, tol, options):
        import scs

        A, b, n_lin, psd_sizes = _stack(red, _svec_index_lower_colmajor)
        data = {"A": A, "b": b, "c": red.c}
        cone = {"l": n_lin, "s": psd_sizes}
        solver = scs.SCS(
            data, cone,
            eps_abs=max(tol, 1e-9), eps_rel=max(tol, 1e-9),
            verbose=bool(options.get("verbose", False)),
            max_iters=int(options.get("max_iter", 200000)),
        )
        sol = solver.solve()
        st = sol["info"]["status"]
        mapping = {
            "solved": "optimal",
            "solved_inaccurate": "near_optimal",
            "infeasible": "infeasible",
            "infeasible_inaccurate": "infeasible",
            "unbounded": "unbounded",
            "unbounded_inaccurate": "unbounded",
        }
        res = SolveResult(mapping.get(st, "solver_error"), backend=self.name, message=st)
        if res.status in OK_STATUSES:
            res.x = np.asarray(sol["x"])
            res.primal_objective = float(sol["info"]["pobj"])
            res.dual_objective = float(sol["info"]["dobj"])
        res.info = {"iterations": int(sol["info"]["iter"])}
        return res


BACKENDS: dict[str, Backend] = {
    b.name: b for b in (ClarabelBackend(), CvxoptBackend(), ScsBackend())
}
_LOCKS = {name: threading.Lock() for name in BACKENDS}


def default_backend() -> str:
    return os.environ.get("KMSBOUND_BACKEND", "clarabel")


def available_backends() -> list[str]:
    return [n for n, b in BACKENDS.items() if b.available()]


def solve_reduced(red: ReducedProgram, backend: str | None = None, tol: float = 1e-8, **options) -> SolveResult:
    name = backend or default_backend()
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}; known: {sorted(BACKENDS)}")
    be = BACKENDS[name]
    if not be.available():
        raise ValueError(f"backend {name!r} is not installed")
    t0 = time.perf_counter()
    if red.n == 0 or not red.blocks:
        # constant program: feasibility was checked during reduction
        if red.n and np.abs(red.c).max() > 1e-12:
            res = SolveResult("unbounded", backend=name, message="no constraints")
        else:
            res = SolveResult("optimal", backend=name, message="trivial")
            res.x = np.zeros(red.n)
            res.primal_objective = res.dual_objective = 0.0
    else:
        try:
            if be.reentrant:
                res = be.solve(red, tol, options)
            else:
                with _LOCKS[name]:
                    res = be.solve(red, tol, options)
        except Exception as exc:  # backend crash is reported, never turned into a bound
            res = SolveResult("solver_error", backend=name, message=f"{type(exc).__name__}: {exc}")
    res.seconds = time.perf_counter() - t0
    if res.ok:
        res.primal_objective += red.c0
        res.dual_objective += red.c0
        res.objective = res.primal_objective
        res.gap = abs(res.primal_objective - res.dual_objective)
        y = res.x
        res.x = red.lift(y)
        res.min_eig = min(
            (float(np.linalg.eigvalsh(b.matrix(y))[0]) for b in red.blocks), default=0.0
        )
    return res


def solve(p: ConicProgram, backend: str | None = None, tol: float = 1e-8, **options) -> SolveResult:
    """Minimize ``p``; equality-infeasible programs report ``infeasible``."""
    t0 = time.perf_counter()
    try:
        red = reduce_program(p)
    except InfeasibleEqualities as exc:
        return SolveResult("infeasible", backend=backend or default_backend(), message=str(exc),
                           seconds=time.perf_counter() - t0)
    res = solve_reduced(red, backend, tol, **options)
    res.seconds = time.perf_counter() - t0
    return res
