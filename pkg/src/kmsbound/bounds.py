"""Two-sided bounds ``p_min <= <O> <= p_max`` from one relaxation skeleton."""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .conic import ConicProgram, InfeasibleEqualities, reduce_program
from .kms_commuting import build_commuting
from .lattice import InteractionSpec
from .relaxation import RelaxationConfig, build
from .solvers import SolveResult, default_backend, solve_reduced

GAP_THRESHOLD = 1e-4


@dataclass
class BoundReport:
    p_min: float
    p_max: float
    raw_min: float
    raw_max: float
    gap_min: float
    gap_max: float
    status_min: str
    status_max: str
    certified: bool
    config: dict = field(default_factory=dict)
    seconds: float = 0.0
    messages: tuple = ()
    # solved program variables of the two senses, None on failure
    x_min: np.ndarray | None = field(default=None, repr=False)
    x_max: np.ndarray | None = field(default=None, repr=False)

    @property
    def failed(self) -> bool:
        ok = ("optimal", "near_optimal")
        return self.status_min not in ok or self.status_max not in ok

    @property
    def exit_code(self) -> int:
        if self.failed:
            return 2
        return 0 if self.certified else 1

    def format(self) -> str:
        cfg = ", ".join(f"{k}={v}" for k, v in self.config.items())
        tag = "CERTIFIED" if self.certified else ("FAILED" if self.failed else "NOT CERTIFIED")
        lines = [
            f"interval  [{self.p_min:.10g}, {self.p_max:.10g}]  {tag}",
            f"min: {self.status_min}  objective {self.raw_min:.12g}  gap {self.gap_min:.3g}",
            f"max: {self.status_max}  objective {self.raw_max:.12g}  gap {self.gap_max:.3g}",
            f"config: {cfg}",
            f"wall time: {self.seconds:.2f} s",
        ]
        lines += [f"note: {m}" for m in self.messages if m]
        return "\n".join(lines)


def _widen(res: SolveResult, sign: float) -> tuple[float, float, float]:
    """Raw value, gap and the conservative end of the interval."""
    if not res.ok:
        return math.nan, math.nan, -sign * math.inf
    raw = sign * res.objective
    gap = res.gap if math.isfinite(res.gap) else math.inf
    return raw, gap, raw - sign * gap


def bounds_from_program(
    program: ConicProgram,
    backend: str | None = None,
    tol: float = 1e-8,
    gap_threshold: float = GAP_THRESHOLD,
    config: dict | None = None,
    **options,
) -> BoundReport:
    """Solve ``min`` and ``max`` of a program that minimizes ``w(O)``."""
    t0 = time.perf_counter()
    backend = backend or default_backend()
    try:
        red = reduce_program(program)
    except InfeasibleEqualities as exc:
        bad = SolveResult("infeasible", backend=backend, message=str(exc))
        res_min = res_max = bad
    else:
        res_min = solve_reduced(red, backend, tol, **options)
        red_max = dataclasses.replace(red, c=-red.c, c0=-red.c0)
        res_max = solve_reduced(red_max, backend, tol, **options)
    raw_min, gap_min, p_min = _widen(res_min, 1.0)
    raw_max, gap_max, p_max = _widen(res_max, -1.0)
    certified = (
        res_min.ok and res_max.ok
        and max(gap_min, gap_max) <= gap_threshold
        and p_min <= p_max + gap_threshold
    )
    cfg = dict(config or {})
    cfg.setdefault("backend", backend)
    msgs = tuple(m for m in (res_min.message if not res_min.ok else "",
                             res_max.message if not res_max.ok else "") if m)
    return BoundReport(p_min, p_max, raw_min, raw_max, gap_min, gap_max,
                       res_min.status, res_max.status, certified, cfg,
                       time.perf_counter() - t0, msgs,
                       res_min.x if res_min.ok else None, res_max.x if res_max.ok else None)


def compute_bounds(
    spec: InteractionSpec,
    cfg: RelaxationConfig,
    backend: str | None = None,
    tol: float = 1e-8,
    commuting: bool = False,
    gap_threshold: float = GAP_THRESHOLD,
    **options,
) -> BoundReport:
    """Build the relaxation once and solve both senses on it."""
    t0 = time.perf_counter()
    cfg = dataclasses.replace(cfg, sense="min")
    program = build_commuting(spec, cfg) if commuting else build(spec, cfg)
    echo = {
        "ell": cfg.ell if cfg.window is None else None,
        "m": cfg.m,
        "beta": cfg.beta,
        "lmom": cfg.lmom,
        "backend": backend or default_backend(),
        "commuting": commuting,
    }
    rep = bounds_from_program(program, backend, tol, gap_threshold, echo, **options)
    rep.seconds = time.perf_counter() - t0
    return rep
