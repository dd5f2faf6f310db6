"""Command-line front end: ``python -m frl <command> ...``.

Every command writes JSON (schema 1) or CSV, chosen by the extension of
``--out``; without ``--out`` JSON goes to stdout.  Invalid flags exit with
status 2, numerical failures with status 1 and a diagnostic JSON object on
stderr.  Nothing is random and no timestamps are written, so identical
invocations produce identical bytes.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from decimal import Decimal
from typing import Sequence

import numpy as np

from . import __version__
from .constants import FracParams, a_frac, c_frac, gamma_alpha, h_frac
from .operator import DomainGeometry
from .parallel import ordered_map, thread_count
from .quadrature import DivergenceError, DomainError, QuadSpec
from .solver import AssemblyError, EigenError, assemble_stiffness, solve_dirichlet, solve_eigen

SCHEMA = 1

IDENTITY_COLUMNS = ["s", "lambda", "lhs", "seminorm_term", "boundary_factor", "remainder", "ds_estimate",
                    "error_budget"]


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument parsing


def parse_grid(text: str) -> list[float]:
    """'a:b:step' (a included, values above b excluded), a comma list, or one value."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid {text!r} must look like a:b:step")
        try:
            a, b, h = (Decimal(p) for p in parts)
        except Exception as exc:
            raise UsageError(f"bad grid {text!r}") from exc
        if h <= 0:
            raise UsageError("grid step must be positive")
        out, k = [], 0
        while a + k * h <= b:
            out.append(float(a + k * h))
            k += 1
    else:
        try:
            out = [float(p) for p in text.split(",") if p.strip()]
        except ValueError as exc:
            raise UsageError(f"bad value list {text!r}") from exc
    if not out:
        raise UsageError(f"grid {text!r} is empty")
    for v in out:
        if not 0.5 < v < 1.0:
            raise UsageError(f"s = {v} is outside (0.5, 1)")
    if any(b <= a for a, b in zip(out, out[1:])):
        raise UsageError("s grid must be strictly increasing")
    return out


def _domain(N: int, delta: str) -> DomainGeometry:
    return DomainGeometry("interval" if N == 1 else "ball", N, delta)


def _spec(args) -> QuadSpec:
    return QuadSpec(rel_tol=args.rel_tol, abs_tol=args.abs_tol)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="frl", description="Regional fractional Laplacian laboratory")
    p.add_argument("--version", action="version", version=f"frl {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, grid=False, n=True):
        sp.add_argument("--N", type=int, default=1, help="dimension (1: interval, >=2: radial ball)")
        sp.add_argument("--s", required=True, help="order in (1/2, 1)" + ("; grid a:b:step or list" if grid else ""))
        if n:
            sp.add_argument("--n", type=int, default=32, help="basis size")
        sp.add_argument("--delta", choices=("blended", "rho"), default="blended")
        sp.add_argument("--rel-tol", type=float, default=1e-10)
        sp.add_argument("--abs-tol", type=float, default=1e-14)
        sp.add_argument("--out", help="output file (.json or .csv)")

    c = sub.add_parser("constants", help="c_{N,s}, a_{N,s}, h_{N,s} and optional gamma(alpha, s)")
    c.add_argument("--N", type=int, default=1)
    c.add_argument("--s", required=True)
    c.add_argument("--alpha", help="comma list of alpha values for the gamma table")
    c.add_argument("--out")

    sp = sub.add_parser("solve", help="Dirichlet problem with constant right-hand side")
    common(sp)
    sp.add_argument("--rhs", type=float, default=1.0, help="constant right-hand side f")

    sp = sub.add_parser("eigen", help="smallest eigenpairs")
    common(sp)
    sp.add_argument("--k", type=int, default=1)

    for name, hlp in (("identity", "terms of the linear identity"),
                      ("nonlinear-identity", "terms of the identity with f(u)")):
        sp = sub.add_parser(name, help=hlp)
        common(sp, grid=True)
        sp.add_argument("--solution", default="torsion", help="torsion or eigenK (eigen1, eigen2, ...)")
        sp.add_argument("--levels", type=int, default=2)

    sp = sub.add_parser("lemma27", help="compact-support deformation identity on the interval")
    sp.add_argument("--s", required=True)
    sp.add_argument("--field", choices=("constant", "x", "Ys", "all"), default="all")
    sp.add_argument("--center", type=float, default=0.0)
    sp.add_argument("--radius", type=float, default=0.6)
    sp.add_argument("--out")

    sp = sub.add_parser("estimate-ds", help="d_s from torsion and eigenfunctions plus the half-line formulas")
    common(sp, grid=True)
    sp.add_argument("--eigen", type=int, default=1, help="number of eigenfunctions in the battery")
    sp.add_argument("--no-analytic", action="store_true")
    sp.add_argument("--levels", type=int, default=2)

    sp = sub.add_parser("probe-remainder", help="exploratory table of R[u_s] and the Hardy bracket")
    common(sp, grid=True)
    sp.set_defaults(n=24)
    sp.add_argument("--levels", type=int, default=2)
    return p


# ---------------------------------------------------------------------------
# output


def _num(v):
    if v is None:
        return None
    v = float(v)
    if math.isnan(v):
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _json_text(obj) -> str:
    return json.dumps(_sanitize(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv_text(columns: Sequence[str], rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        cells = []
        for c in columns:
            v = r.get(c)
            if isinstance(v, (float, np.floating)):
                v = _num(v)
            cells.append("" if v is None else (repr(v) if isinstance(v, float) else v))
        w.writerow(cells)
    return buf.getvalue()


def emit(payload: dict, out: str | None, columns: Sequence[str] | None = None, rows: Sequence[dict] | None = None):
    payload = {"schema": SCHEMA, **payload}
    if out is None:
        sys.stdout.write(_json_text(payload))
        return
    if out.endswith(".json"):
        text = _json_text(payload)
    elif out.endswith(".csv"):
        if columns is None:
            raise UsageError("this command has no tabular output; use .json")
        text = _csv_text(columns, rows)
    else:
        raise UsageError("output format is inferred from the extension: use .json or .csv")
    with open(out, "w", newline="") as fh:
        fh.write(text)


def _check_out(args):
    out = getattr(args, "out", None)
    if out is not None and not (out.endswith(".json") or out.endswith(".csv")):
        raise UsageError("output format is inferred from the extension: use .json or .csv")


# ---------------------------------------------------------------------------
# commands


def _single_s(text: str) -> float:
    vals = parse_grid(text)
    if len(vals) != 1:
        raise UsageError("this command takes a single s")
    return vals[0]


def cmd_constants(args):
    if args.N < 1:
        raise UsageError("N must be >= 1")
    s = _single_s(args.s)
    payload = {"command": "constants", "N": args.N, "s": s, "c_ns": c_frac(args.N, s), "a_ns": a_frac(args.N, s),
               "h_ns": h_frac(args.N, s)}
    if args.alpha:
        try:
            alphas = [float(a) for a in args.alpha.split(",")]
        except ValueError as exc:
            raise UsageError("--alpha takes a comma list of numbers") from exc
        payload["gamma"] = [{"alpha": a, "gamma": gamma_alpha(a, s)} for a in alphas]
    emit(payload, args.out)


def _solution(kind: str, P: FracParams, dom: DomainGeometry, n: int, spec: QuadSpec, K=None):
    """(u, lambda or None, sup of the right-hand side)."""
    if kind == "torsion":
        u = solve_dirichlet(lambda x: 1.0, P, dom, n, spec, stiffness=K, residuals=False)
        return u, None, 1.0
    if kind.startswith("eigen"):
        try:
            k = int(kind[5:] or "1")
        except ValueError as exc:
            raise UsageError(f"unknown solution {kind!r}") from exc
        if k < 1:
            raise UsageError("eigenfunctions are numbered from 1")
        ep = solve_eigen(P, dom, n, k, spec, stiffness=K)[k - 1]
        return ep.eigenfunction, ep.lam, None
    raise UsageError(f"unknown solution {kind!r}")


def cmd_solve(args):
    s = _single_s(args.s)
    P, dom = FracParams.make(args.N, s), _domain(args.N, args.delta)
    u = solve_dirichlet(lambda x: args.rhs, P, dom, args.n, _spec(args))
    d = u.to_dict("dirichlet")
    d["rhs"] = args.rhs
    d.pop("schema")
    emit(d, args.out)


def cmd_eigen(args):
    s = _single_s(args.s)
    if not 1 <= args.k <= args.n:
        raise UsageError("need 1 <= k <= n")
    P, dom = FracParams.make(args.N, s), _domain(args.N, args.delta)
    pairs = solve_eigen(P, dom, args.n, args.k, _spec(args))
    rows = []
    for j, ep in enumerate(pairs, 1):
        d = ep.eigenfunction.to_dict("eigen")
        d.pop("schema")
        rows.append({"index": j, "lambda": ep.lam, "eigenfunction": d})
    emit({"command": "eigen", "N": args.N, "s": s, "n": args.n, "pairs": rows}, args.out,
         ["index", "lambda"], [{"index": r["index"], "lambda": r["lambda"]} for r in rows])


def _identity_row(s, args, nonlinear=False):
    from .pohozaev import RightHandSide, identity_terms, nonlinear_identity

    P, dom = FracParams.make(args.N, s), _domain(args.N, args.delta)
    spec = _spec(args)
    u, lam, rsup = _solution(args.solution, P, dom, args.n, spec)
    if nonlinear:
        f = RightHandSide("constant", 1.0) if lam is None else RightHandSide("linear", lam)
        rep = nonlinear_identity(u, f, P, dom, spec, args.levels)
        d = rep.as_dict()
        row = {"s": s, "lambda": lam, "lhs": rep.lhs_nl, "seminorm_term": rep.subterms["seminorm_shifted"],
               "boundary_factor": rep.boundary_factor, "remainder": rep.subterms["remainder_R"],
               "remainder_tilde": rep.remainder_tilde, "ds_estimate": rep.ds_estimate,
               "error_budget": rep.quadrature_error_budget, "ds_error": rep.ds_error}
    else:
        rep = identity_terms(u, P, dom, spec, args.levels, rhs_sup=rsup)
        d = rep.as_dict()
        row = {"s": s, "lambda": lam, "lhs": rep.lhs, "seminorm_term": rep.seminorm_term,
               "boundary_factor": rep.boundary_factor, "remainder": rep.remainder, "ds_estimate": rep.ds_estimate,
               "error_budget": rep.quadrature_error_budget, "ds_error": rep.ds_error,
               "remainder_budget": rep.remainder_budget}
    d["lambda"] = lam
    d["solution"] = args.solution
    return d, row


def _cmd_identity(args, nonlinear):
    grid = parse_grid(args.s)
    if args.levels < 2:
        raise UsageError("--levels must be >= 2 (the error budget needs two levels)")
    res = ordered_map(lambda s: _identity_row(s, args, nonlinear), grid)
    cols = IDENTITY_COLUMNS + (["remainder_tilde", "ds_error"] if nonlinear else ["ds_error", "remainder_budget"])
    emit({"command": args.command, "N": args.N, "n": args.n, "solution": args.solution,
          "reports": [r[0] for r in res]}, args.out, cols, [r[1] for r in res])


def cmd_identity(args):
    _cmd_identity(args, False)


def cmd_nonlinear(args):
    _cmd_identity(args, True)


def cmd_lemma27(args):
    from .pohozaev import Bump, field_constant, field_identity, field_Ys, lemma27_check

    s = _single_s(args.s)
    P = FracParams.make(1, s)
    phi = Bump(args.center, args.radius)
    fields = {"constant": field_constant(), "x": field_identity(), "Ys": field_Ys(s)}
    names = list(fields) if args.field == "all" else [args.field]
    res = ordered_map(lambda k: lemma27_check(phi, fields[k], P), names)
    rows = [dict(r.as_dict(), s=s) for r in res]
    cols = ["s", "field", "lhs", "drift", "boundary_kernel", "residual", "relative_residual", "error_budget"]
    emit({"command": "lemma27", "s": s, "phi": {"center": args.center, "radius": args.radius}, "results": rows},
         args.out, cols, rows)


def _estimate_one(s, args):
    from .halfline_constants import PROFILE_A, PROFILE_B, d_s_analytic
    from .pohozaev import combine_estimates, identity_terms

    P, dom = FracParams.make(args.N, s), _domain(args.N, args.delta)
    spec = _spec(args)
    K = assemble_stiffness(P, dom, args.n, spec)
    names = ["torsion"] + [f"eigen{k}" for k in range(1, args.eigen + 1)]
    rows = []
    for name in names:
        u, lam, rsup = _solution(name, P, dom, args.n, spec, K)
        rep = identity_terms(u, P, dom, spec, args.levels, rhs_sup=rsup)
        rows.append({"s": s, "solution": name, "lambda": lam, "lhs": rep.lhs, "seminorm_term": rep.seminorm_term,
                     "boundary_factor": rep.boundary_factor, "remainder": rep.remainder,
                     "ds_estimate": rep.ds_estimate, "error_budget": rep.quadrature_error_budget,
                     "ds_error": rep.ds_error, "ds_estimate_unit_coefficient": rep.ds_estimate_unit_coefficient})
    mean, err = combine_estimates([r["ds_estimate"] for r in rows], [r["ds_error"] for r in rows])
    extra = {"ds_combined": mean, "ds_combined_error": err}
    if not args.no_analytic:
        va, vb, spread, (a, b) = d_s_analytic(P, PROFILE_A, PROFILE_B)
        extra.update({"ds_analytic_A": va, "ds_analytic_A_error": a.error, "ds_analytic_B": vb,
                      "ds_analytic_B_error": b.error, "analytic_spread": spread})
    for r in rows:
        r.update(extra)
    return rows


ESTIMATE_COLUMNS = ["s", "solution", "lambda", "lhs", "seminorm_term", "boundary_factor", "remainder",
                    "ds_estimate", "error_budget", "ds_error", "ds_estimate_unit_coefficient", "ds_combined",
                    "ds_combined_error", "ds_analytic_A", "ds_analytic_A_error", "ds_analytic_B",
                    "ds_analytic_B_error", "analytic_spread"]


def cmd_estimate(args):
    grid = parse_grid(args.s)
    if args.eigen < 0:
        raise UsageError("--eigen must be >= 0")
    if args.levels < 2:
        raise UsageError("--levels must be >= 2 (the error budget needs two levels)")
    per_s = ordered_map(lambda s: _estimate_one(s, args), grid)
    rows = [r for block in per_s for r in block]
    emit({"command": "estimate-ds", "N": args.N, "n": args.n, "delta": args.delta, "rows": rows},
         args.out, ESTIMATE_COLUMNS, rows)


PROBE_COLUMNS = ["s", "lambda", "l2_norm", "remainder", "remainder_error", "bracket", "bracket_error", "error"]


def cmd_probe(args):
    from .pohozaev import probe_open_question

    grid = parse_grid(args.s)
    if grid[0] < 0.55 or grid[-1] > 0.97:
        raise UsageError("probe grid must lie within [0.55, 0.97]")
    rows = [r.as_dict() for r in probe_open_question(grid, args.N, args.n, _spec(args), args.levels)]
    for r in rows:
        r["lambda"] = r.pop("lam")
    emit({"command": "probe-remainder", "N": args.N, "n": args.n,
          "note": "exploratory output; the sign of limsup R[u_s] is an open question and no verdict is drawn",
          "rows": rows}, args.out, PROBE_COLUMNS, rows)


COMMANDS = {
    "constants": cmd_constants,
    "solve": cmd_solve,
    "eigen": cmd_eigen,
    "identity": cmd_identity,
    "nonlinear-identity": cmd_nonlinear,
    "lemma27": cmd_lemma27,
    "estimate-ds": cmd_estimate,
    "probe-remainder": cmd_probe,
}

NUMERICAL_ERRORS = (DivergenceError, AssemblyError, EigenError, ArithmeticError, np.linalg.LinAlgError)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if hasattr(args, "N") and args.N < 1:
            raise UsageError("N must be >= 1")
        if hasattr(args, "n") and args.n < 1:
            raise UsageError("n must be >= 1")
        _check_out(args)
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.error(str(exc))
    except NUMERICAL_ERRORS as exc:
        diag = {"schema": SCHEMA, "status": "numerical-failure", "command": args.command,
                "error_type": type(exc).__name__, "message": str(exc), "threads": thread_count()}
        hist = getattr(exc, "history", None)
        if hist:
            diag["history"] = [_num(v) for v in hist]
        rep = getattr(exc, "report", None)
        if rep is not None:
            diag["report"] = rep.as_dict()
        sys.stderr.write(_json_text(diag))
        return 1
    except DomainError as exc:
        # TraceTooSmall is a DomainError raised by a numerical outcome, not by the flags
        if getattr(exc, "report", None) is not None:
            diag = {"schema": SCHEMA, "status": "numerical-failure", "command": args.command,
                    "error_type": type(exc).__name__, "message": str(exc), "report": exc.report.as_dict()}
            sys.stderr.write(_json_text(diag))
            return 1
        parser.error(str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
