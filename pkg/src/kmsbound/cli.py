"""Command line entry point: ``kmsbound {bound,sweep,oracle,export,validate,ed}``.

Exit codes: 0 certified / passed, 1 solved but not certified (or validation
failed), 2 solver failure, 3 parse or input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .bounds import GAP_THRESHOLD, compute_bounds
from .conic import export_sdpa, reduce_program
from .kms_commuting import build_commuting
from .lattice import ModelParseError, Window, load_model
from .moments import MomentFunctional
from .oracles import ORACLE_OBSERVABLES, ed_gibbs_marginal, oracle_csv
from .pauli import parse_operator
from .relaxation import RelaxationConfig, build, default_eeb_window, random_span_samples, scalar_eeb_check

EXIT_OK, EXIT_UNCERTIFIED, EXIT_SOLVER, EXIT_INPUT = 0, 1, 2, 3
VALIDATE_TOL = 1e-6
SWEEP_COLUMNS = ("beta", "ell", "m", "p_min", "p_max", "status_min", "status_max", "seconds")


class InputError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the input-error code instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# argument parsing helpers ------------------------------------------------------------


def parse_beta(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "infinity", "+inf"):
        return math.inf
    try:
        b = float(t)
    except ValueError:
        raise InputError(f"bad beta {text!r}") from None
    if not b >= 0:
        raise InputError("beta must be nonnegative")
    return b


def parse_betas(text: str) -> list[float]:
    return [parse_beta(t) for t in text.split(",") if t.strip()]


def parse_window(text: str | None, dim: int = 1) -> Window | None:
    """``lo:hi`` (inclusive interval, 1D) or ``box:ell``."""
    if text is None:
        return None
    t = text.strip()
    try:
        if t.startswith("box:"):
            return Window.box(int(t[4:]), dim)
        lo, hi = t.split(":")
        if dim != 1:
            raise InputError("interval windows are 1D; use box:ell")
        return Window.interval(int(lo), int(hi))
    except (ValueError, TypeError):
        raise InputError(f"bad window {text!r}; expected lo:hi or box:ell") from None


def parse_grid(text: str) -> tuple[str, list[float]]:
    """``name=lo:hi:step`` (inclusive) or ``name=v1,v2,...``."""
    if "=" not in text:
        raise InputError(f"bad grid {text!r}; expected name=lo:hi:step or name=v1,v2")
    name, spec = text.split("=", 1)
    name = name.strip()
    if not name:
        raise InputError(f"bad grid {text!r}; missing parameter name")
    try:
        if ":" in spec:
            lo, hi, step = (float(v) for v in spec.split(":"))
            if step <= 0:
                raise InputError("grid step must be positive")
            count = int(math.floor((hi - lo) / step + 1e-9)) + 1
            vals = [round(lo + k * step, 12) for k in range(count)]
        else:
            vals = [float(v) for v in spec.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"bad grid {text!r}") from None
    if not vals:
        raise InputError("empty grid")
    return name, vals


def parse_params(items) -> dict:
    out = {}
    for it in items or ():
        if "=" not in it:
            raise InputError(f"bad --param {it!r}; expected name=value")
        k, v = it.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise InputError(f"bad --param value {v!r}") from None
    return out


def _load(args):
    spec = load_model(args.model)
    params = parse_params(getattr(args, "param", None))
    if params:
        spec = spec.with_params(**params)
    return spec


def _config(args, spec, beta=None, sense="min") -> RelaxationConfig:
    try:
        obj = parse_operator(args.obs)
    except ValueError as exc:
        raise InputError(f"bad observable: {exc}") from None
    return RelaxationConfig(
        objective=obj,
        ell=args.ell,
        window=parse_window(args.window, spec.dim),
        eeb_window=parse_window(args.eeb_window, spec.dim),
        lmom=args.lmom,
        beta=args.beta if beta is None else beta,
        m=args.m,
        moment_floor=args.moment_floor,
        sense=sense,
    )


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# commands ---------------------------------------------------------------------------


def cmd_bound(args) -> int:
    spec = _load(args)
    cfg = _config(args, spec)
    rep = compute_bounds(spec, cfg, backend=args.backend, tol=args.tol, commuting=args.commuting,
                         gap_threshold=args.gap_threshold)
    text = rep.format() + "\n"
    print(text, end="")
    if args.out:
        _emit(text, args.out)
    return rep.exit_code


def _sweep_point(job):
    spec, cfg, backend, tol, commuting, gap_threshold = job
    try:
        rep = compute_bounds(spec, cfg, backend=backend, tol=tol, commuting=commuting,
                             gap_threshold=gap_threshold)
        return (rep.p_min, rep.p_max, rep.status_min, rep.status_max, rep.seconds)
    except Exception as exc:  # recorded in the row, the sweep continues
        msg = f"error: {type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")
        return (math.nan, math.nan, msg, msg, 0.0)


def _fmt(v: float) -> str:
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def cmd_sweep(args) -> int:
    spec = _load(args)
    name, values = parse_grid(args.grid)
    if name not in dict(spec.params):
        raise InputError(f"model has no parameter {name!r}")
    jobs, keys = [], []
    for beta in parse_betas(args.betas):
        for v in values:
            cfg = _config(args, spec, beta=beta)
            jobs.append((spec.with_params(**{name: v}), cfg, args.backend, args.tol, args.commuting,
                         args.gap_threshold))
            keys.append((v, beta))
    n_workers = max(1, min(args.jobs or os.cpu_count() or 1, len(jobs)))
    if n_workers == 1:
        results = [_sweep_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(n_workers) as ex:
            results = list(ex.map(_sweep_point, jobs))  # map keeps grid order
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow((name,) + SWEEP_COLUMNS)
    failed = False
    for (v, beta), (pmin, pmax, smin, smax, secs) in zip(keys, results):
        failed |= smin not in ("optimal", "near_optimal") or smax not in ("optimal", "near_optimal")
        wr.writerow([_fmt(v), _fmt(beta), args.ell if args.window is None else "", args.m,
                     _fmt(pmin), _fmt(pmax), smin, smax, f"{secs:.3f}"])
    _emit(buf.getvalue(), args.out)
    return EXIT_SOLVER if failed else EXIT_OK


def cmd_oracle(args) -> int:
    if args.model not in ("tfising",):
        raise InputError("closed-form oracles exist for the 'tfising' model only")
    name, values = parse_grid(args.grid)
    if name != "g":
        raise InputError("the tfising oracle grid runs over g")
    _emit(oracle_csv(args.obs, values, parse_betas(args.betas)), args.out)
    return EXIT_OK


def cmd_export(args) -> int:
    spec = _load(args)
    cfg = _config(args, spec, sense=args.sense)
    p = build_commuting(spec, cfg) if args.commuting else build(spec, cfg)
    red = reduce_program(p)
    export_sdpa(red, args.out)
    print(f"wrote {args.out}: {red.n} variables, blocks {red.block_sizes()}")
    return EXIT_OK


def _infer_window(text: str) -> Window:
    rd = csv.reader(io.StringIO(text))
    next(rd, None)
    sites = set()
    for row in rd:
        if row:
            sites.update(parse_operator(row[0]).support)
    if not sites:
        raise InputError("assignment has no sites")
    dim = len(next(iter(sites)))
    lo = [min(s[d] for s in sites) for d in range(dim)]
    hi = [max(s[d] for s in sites) for d in range(dim)]
    return Window(tuple(itertools.product(*(range(a, b + 1) for a, b in zip(lo, hi)))))


def cmd_validate(args) -> int:
    spec = _load(args)
    with open(args.assignment, encoding="utf-8") as fh:
        text = fh.read()
    w = parse_window(args.window, spec.dim) or _infer_window(text)
    labels = [r[0] for r in csv.reader(io.StringIO(text)) if r][1:]
    real = all(parse_operator(s).items() and all(p.n_y % 2 == 0 for p in parse_operator(s)) for s in labels)
    try:
        f = MomentFunctional(w, real=real).read_csv(text)
    except ValueError as exc:
        raise InputError(f"bad assignment: {exc}") from None
    ew = parse_window(args.eeb_window, spec.dim) or default_eeb_window(spec, w)
    if ew is None:
        raise InputError("no EEB window fits inside the assignment window")
    rng = np.random.default_rng(args.seed)
    samples = random_span_samples(ew.sites, args.samples, rng, real=real)
    rep = scalar_eeb_check(spec, args.beta, f, samples, m=args.m)
    ok = rep.max_violation <= VALIDATE_TOL
    print(f"samples {len(samples)} on {ew.label()}  max violation {rep.max_violation:.3e}  "
          f"{'PASS' if ok else 'FAIL'} (tolerance {VALIDATE_TOL:g})")
    return EXIT_OK if ok else EXIT_UNCERTIFIED


def cmd_ed(args) -> int:
    spec = _load(args)
    w = parse_window(args.window, spec.dim)
    _, f = ed_gibbs_marginal(spec, args.n, args.beta, w)
    _emit(f.to_csv(), args.out)
    return EXIT_OK


# parser -----------------------------------------------------------------------------


def _relaxation_flags(p, betas=False):
    p.add_argument("--model", required=True, help="model file or builtin name")
    p.add_argument("--obs", required=True, help='observable, e.g. "Z0 Z1" or "0.5 X0 + Z0"')
    if betas:
        p.add_argument("--beta", dest="betas", default="inf", help="inverse temperature(s), comma separated; inf allowed")
    else:
        p.add_argument("--beta", type=parse_beta, default=math.inf, help="inverse temperature or inf")
    p.add_argument("--ell", type=int, default=1, help="window {-ell..ell}^D")
    p.add_argument("--window", help="explicit window lo:hi or box:ell (overrides --ell)")
    p.add_argument("--m", type=int, default=3, help="level of the entropy under-approximation")
    p.add_argument("--lmom", type=int, help="sites in the positivity block (default: whole window)")
    p.add_argument("--eeb-window", help="window of the EEB operator basis")
    p.add_argument("--moment-floor", type=float, help="optional floor A, B >= c I")
    p.add_argument("--commuting", action="store_true", help="linear KMS relaxation for commuting models")
    p.add_argument("--backend", help="solver backend (default: $KMSBOUND_BACKEND or clarabel)")
    p.add_argument("--tol", type=float, default=1e-8, help="solver tolerance")
    p.add_argument("--gap-threshold", type=float, default=GAP_THRESHOLD, help="largest gap still certified")
    p.add_argument("--param", action="append", help="model parameter override name=value")
    p.add_argument("--out", help="output file")


def make_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="kmsbound", description="Certified bounds on equilibrium expectation values.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="lower and upper bound on one observable")
    _relaxation_flags(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("sweep", help="bounds over a parameter grid (CSV)")
    _relaxation_flags(p, betas=True)
    p.add_argument("--grid", required=True, help="name=lo:hi:step or name=v1,v2,...")
    p.add_argument("--jobs", type=int, help="worker processes (default: cores)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="closed-form reference values (CSV)")
    p.add_argument("--model", default="tfising")
    p.add_argument("--obs", required=True, choices=ORACLE_OBSERVABLES)
    p.add_argument("--beta", dest="betas", default="inf")
    p.add_argument("--grid", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("export", help="write the reduced program as an SDPA sparse file")
    _relaxation_flags(p)
    p.add_argument("--sense", choices=("min", "max"), default="min")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("validate", help="scalar EEB check of a moment assignment CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--assignment", required=True, help="CSV with columns pauli_string,value")
    p.add_argument("--beta", type=parse_beta, required=True)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--m", type=int, help="check the level-m inequality instead of the exact one")
    p.add_argument("--window", help="assignment window (default: inferred from the CSV)")
    p.add_argument("--eeb-window", help="span of the random operators")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--param", action="append")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("ed", help="exact Gibbs marginal of a periodic ring as an assignment CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, default=8, help="ring size")
    p.add_argument("--beta", type=parse_beta, required=True)
    p.add_argument("--window", required=True, help="lo:hi or box:ell")
    p.add_argument("--param", action="append")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ed)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    if getattr(args, "out", None) is None and args.command == "export":
        ap.error("export needs --out")
    try:
        return args.func(args)
    except ModelParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
