"""Command-line front end: ``tensionlab {solve,construct,audit,distance,example51}``.

Exit codes: 0 success, 1 malformed input, 2 non-convergence, 3 audit failure.
Records and reports are JSON; tables are CSV.  Output is deterministic.
"""
from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .analytic import CONVENTIONS, DEFAULT_CONVENTION
from .audit import AuditOptions, AuditTolerances, audit_record
from .beltrami import construct_entire, nu_quasiregular_field
from .closed_forms import (
    Example51Params,
    example51_coefficient,
    example51_map,
    example51_mu,
    example51_u_cumulative,
    example51_uprime,
    linear_map,
)
from .errors import (
    DidNotConvergeError,
    NotInjectiveError,
    SolverStagnationError,
    TensionLabError,
)
from .field import ComplexField, GridSpec, same_grid
from .metric import builtin_metric, metric_from_theta
from .records import MapRecord, csv_text, dumps, read_record, write_record
from .teichmuller import hyperbolic_distance, teich_distance
from .tension import SolveParams, solve_dirichlet

log = logging.getLogger("tensionlab")

EXIT_OK, EXIT_MALFORMED, EXIT_NONCONVERGED, EXIT_AUDIT_FAILED = 0, 1, 2, 3

BOUNDARY_FIXTURES: Dict[str, Callable] = {
    "identity": lambda z: z,
    "linear": lambda z: 2 * z - 0.5 * np.conj(z),
    "tanh": lambda z: np.log(np.cosh(z.real)) + 1j * z.imag,
    "square": lambda z: z * z,
}


class UsageError(Exception):
    """Malformed command line; the message names the flag."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --- flag parsing ---------------------------------------------------------------

def _floats(flag: str, text: str, n: Optional[int] = None) -> List[float]:
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise UsageError(f"{flag}: expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise UsageError(f"{flag}: expected {n} values, got {len(vals)}")
    return vals


def parse_grid(text: str) -> GridSpec:
    x0, y0, nx, ny, h = _floats("--grid", text, 5)
    if nx != int(nx) or ny != int(ny):
        raise UsageError("--grid: NX and NY must be integers")
    try:
        return GridSpec(x0, y0, int(nx), int(ny), h)
    except TensionLabError as exc:
        raise UsageError(f"--grid: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"--grid: {exc}") from None


def parse_complex(flag: str, text: str) -> complex:
    re_, im = _floats(flag, text, 2)
    return complex(re_, im)


def parse_theta(text: str) -> List[complex]:
    """Coefficients as Python complex literals, e.g. ``0,2`` or ``0,-1j``."""
    try:
        return [complex(t.replace(" ", "")) for t in text.split(",")]
    except ValueError:
        raise UsageError(f"--theta: expected comma-separated complex literals, got {text!r}") from None


def resolve_metric(args):
    if getattr(args, "theta", None) is not None:
        try:
            return metric_from_theta(parse_theta(args.theta))
        except TensionLabError as exc:
            raise UsageError(f"--theta: {exc}") from None
    try:
        return builtin_metric(args.metric)
    except TensionLabError as exc:
        raise UsageError(f"--metric: {exc}") from None


def _add_metric(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--metric", help="built-in metric: euclid, exp_x, exp_y, gauss_nonflat")
    g.add_argument("--theta", help="power-series coefficients of lambda, e.g. '1' for exp_x")


def _add_convention(p):
    p.add_argument("--convention", choices=sorted(CONVENTIONS), default=DEFAULT_CONVENTION,
                   help="sign of the inverse-map equation (default: %(default)s)")


def _emit(path: str, text: str):
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# --- commands ---------------------------------------------------------------------

def cmd_solve(args) -> int:
    metric = resolve_metric(args)
    if args.boundary is not None:
        rec = read_record(args.boundary)
        grid = parse_grid(args.grid) if args.grid else rec.f.grid
        if not same_grid(grid, rec.f.grid):
            raise UsageError("--boundary: record grid differs from --grid")
        boundary = rec.f
    else:
        if not args.grid:
            raise UsageError("--grid: required with --boundary-from")
        grid = parse_grid(args.grid)
        if args.boundary_from == "linear_family":
            try:
                fixture = linear_map(parse_complex("--a", args.a))
            except TensionLabError as exc:
                raise UsageError(f"--a: {exc}") from None
        else:
            fixture = BOUNDARY_FIXTURES[args.boundary_from]
        boundary = ComplexField.sample(grid, fixture)
    try:
        params = SolveParams(tol=args.tol, max_iters=args.max_iters, damping=args.damping, method=args.method)
    except ValueError as exc:
        raise UsageError(f"--tol/--max-iters/--damping: {exc}") from None
    f, report = solve_dirichlet(boundary, metric, grid, params)
    label = args.boundary_from or os.path.basename(args.boundary)
    if args.boundary_from == "linear_family":
        label += f", a={parse_complex('--a', args.a)!r}"
    name = f"solve[{label}]"
    write_record(MapRecord(f, metric, None, None, name), args.out)
    print(report.summary())
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def cmd_construct(args) -> int:
    metric = resolve_metric(args)
    alpha = parse_complex("--alpha", args.alpha)
    grid = parse_grid(args.grid)
    m = construct_entire(alpha, metric, grid, convention=args.convention, margin=args.margin)
    rec = MapRecord(m.f, metric, alpha, m.g, f"construct[{metric.id}, alpha={alpha!r}]")
    write_record(rec, args.out)
    covered = int(m.f.valid.sum())
    print(f"constructed member alpha={alpha!r} on {metric.id}: {covered}/{grid.size} nodes covered")
    return EXIT_OK


def cmd_audit(args) -> int:
    rec = read_record(args.input)
    tol = AuditTolerances(
        tension=args.tol_tension, hopf=args.tol_hopf, lemma1=args.tol_lemma1, lemma2=args.tol_lemma2,
        lemma3=args.tol_lemma3, companion=args.tol_companion, max_principle=args.tol_max_principle,
        mu_spread=args.tol_mu_spread, pushforward=args.tol_pushforward, conjugate=args.tol_conjugate)
    opts = AuditOptions(window=args.window, convention=args.convention,
                        curvature_scale=args.curvature_scale, tolerances=tol)
    report = audit_record(rec, opts, refine=args.refine)
    for line in report.lines():
        print(line)
    if args.out:
        _emit(args.out, dumps(report.to_json()))
    print("audit", "passed" if report.passed else "FAILED")
    return EXIT_OK if report.passed else EXIT_AUDIT_FAILED


def cmd_distance(args) -> int:
    paths = [p for p in args.input.split(",") if p]
    if len(paths) < 2:
        raise UsageError("--in: need at least two records")
    recs = [read_record(p) for p in paths]
    names = [os.path.basename(p) for p in paths]
    for p, r in zip(paths[1:], recs[1:]):
        if not same_grid(r.f.grid, recs[0].f.grid):
            raise UsageError(f"--in: grid-mismatch between {paths[0]} and {p}")
    have_alpha = all(r.alpha is not None for r in recs)
    side = args.side
    if side == "auto":
        side = "target" if have_alpha else "domain"
    where = recs[0].f.grid.central_window(args.window)
    n = len(recs)
    dT = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            dT[i, j] = dT[j, i] = teich_distance(recs[i], recs[j], side=side, where=where).d_teich
    rows: List[list] = [["d_T", names[i]] + list(dT[i]) for i in range(n)]
    summary = [f"side={side}"]
    if have_alpha:
        dH = np.array([[hyperbolic_distance(a.alpha, b.alpha) for b in recs] for a in recs])
        rows += [["d_hyp", names[i]] + list(dH[i]) for i in range(n)]
        disc = float(np.max(np.abs(dT - dH)))
        rows.append(["max_discrepancy", ""] + [disc] + [""] * (n - 1))
        summary.append(f"max |d_T - d_hyp| = {disc:.6e}")
    _emit(args.out, csv_text(["quantity", "record"] + names, rows))
    print("; ".join(summary))
    return EXIT_OK


_VARIANT_ALIASES = {"paper": "paper_literal", "paper_literal": "paper_literal",
                    "corrected": "corrected", "corrected_tension": "corrected_tension"}


def cmd_example51(args) -> int:
    variant = _VARIANT_ALIASES[args.variant]
    try:
        p = Example51Params(args.c, variant)
    except ValueError as exc:
        raise UsageError(f"--c/--variant: {exc}") from None
    a, b, n = _floats("--xrange", args.xrange, 3)
    if n != int(n) or n < 2 or not b > a:
        raise UsageError("--xrange: need A < B and an integer N >= 2")
    xs = np.linspace(a, b, int(n))
    mu = example51_mu(xs, p)
    up = example51_uprime(xs, p)
    u = example51_u_cumulative(xs, p)
    t = p.c * np.exp(p.rate * xs)
    # u' -> 1 where t -> infinity and u' ~ sqrt(t / 2) where t -> 0
    ratio_big_t = up
    ratio_small_t = up / np.sqrt(t / 2)
    coeff = example51_coefficient(p)
    nu_grid = GridSpec(float(a), -1.0, int(n), 3, float((b - a) / (n - 1)))
    Q = np.abs(nu_quasiregular_field(coeff, builtin_metric("exp_x"), args.convention, nu_grid).values[1])
    rows = [[x, m, d, uu, r1, r2, q] for x, m, d, uu, r1, r2, q
            in zip(xs, mu, up, u, ratio_big_t, ratio_small_t, Q)]
    _emit(args.out, csv_text(["x", "mu", "uprime", "u", "ratio_uprime_to_1",
                              "ratio_uprime_to_sqrt_t_over_2", "nu_residual"], rows))
    summary = _example51_summary(p, args.convention)
    if args.summary:
        _emit(args.summary, dumps(summary))
    for k in sorted(summary):
        print(f"{k}: {summary[k]}")
    return EXIT_OK


def _example51_summary(p: Example51Params, convention: str) -> dict:
    grid = GridSpec.from_bounds(-1.0, 1.0, -1.0, 1.0, 1 / 16)
    out = {"c": p.c, "variant": p.variant, "convention": convention}
    if p.rate < 0:
        _, audit = example51_map(grid, p, convention=convention)
        out.update({"u_at_40": audit.u_at_X, "tail_bound_40": audit.tail_bound,
                    "sup_u_bound": audit.sup_u_bound, "uprime_at_-20": audit.uprime_left,
                    "ratio_uprime_at_20": audit.asymptotic_ratio_right,
                    "inverse_residual": audit.inverse_residual, "nu_residual": audit.nu_residual})
    else:
        out["note"] = "u' tends to 1 as x grows; no sup-u bound for this variant"
    return out


# --- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="tensionlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"tensionlab {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="Dirichlet solve of the tension equation")
    _add_metric(p)
    p.add_argument("--grid", help="X0,Y0,NX,NY,H")
    b = p.add_mutually_exclusive_group(required=True)
    b.add_argument("--boundary", help="map record supplying the edge values")
    b.add_argument("--boundary-from", choices=sorted(BOUNDARY_FIXTURES) + ["linear_family"])
    p.add_argument("--a", default="2,0", help="RE,IM for the linear_family fixture a z + (1 - a) conj(z)")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=100_000)
    p.add_argument("--damping", type=float, default=0.8)
    p.add_argument("--method", choices=("picard", "newton", "gauss_seidel"), default="picard")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("construct", help="entire-family member for a flat metric")
    p.add_argument("--alpha", required=True, help="RE,IM with |alpha| < 1")
    _add_metric(p)
    p.add_argument("--grid", required=True, help="X0,Y0,NX,NY,H; must contain 0 and 1")
    p.add_argument("--margin", type=float, default=0.25)
    _add_convention(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("audit", help="run every applicable diagnostic on a map record")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--refine", action="store_true", help="rerun at h/2 and report ratios")
    p.add_argument("--out", help="report file ('-' for stdout)")
    p.add_argument("--window", type=float, default=0.75, help="central fraction audited")
    p.add_argument("--curvature-scale", type=float, default=1e-3)
    _add_convention(p)
    d = AuditTolerances()
    for name in ("tension", "hopf", "lemma1", "lemma2", "lemma3", "companion", "max_principle",
                 "mu_spread", "pushforward", "conjugate"):
        p.add_argument(f"--tol-{name.replace('_', '-')}", type=float, default=getattr(d, name))
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("distance", help="pairwise Teichmueller distances")
    p.add_argument("--in", dest="input", required=True, help="A,B,... records on one grid")
    p.add_argument("--side", choices=("auto", "domain", "target"), default="auto")
    p.add_argument("--window", type=float, default=0.75)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("example51", help="real-coefficient example table and audit")
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--variant", choices=sorted(_VARIANT_ALIASES), default="paper")
    p.add_argument("--xrange", default="-20,40,61", help="A,B,N")
    # the example is posed with the printed sign
    p.add_argument("--convention", choices=sorted(CONVENTIONS), default="printed",
                   help="sign of the inverse-map equation (default: %(default)s)")
    p.add_argument("--out", default="-")
    p.add_argument("--summary", help="write the audit summary as JSON")
    p.set_defaults(func=cmd_example51)
    return ap


_NEGATIVE = re.compile(r"^-(\d|\.\d|inf|nan)")


def _attach_negative_values(argv: Sequence[str]) -> List[str]:
    """Rewrite ``--flag -1,2`` as ``--flag=-1,2`` so argparse does not read the value as an option."""
    out: List[str] = []
    k = 0
    while k < len(argv):
        tok = argv[k]
        if (tok.startswith("--") and "=" not in tok and k + 1 < len(argv)
                and _NEGATIVE.match(argv[k + 1])):
            out.append(f"{tok}={argv[k + 1]}")
            k += 2
        else:
            out.append(tok)
            k += 1
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_attach_negative_values(argv))
    except UsageError as exc:
        print(f"tensionlab: error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tensionlab: error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except (DidNotConvergeError, SolverStagnationError, NotInjectiveError) as exc:
        print(f"tensionlab: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except TensionLabError as exc:
        print(f"tensionlab: error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except OSError as exc:
        print(f"tensionlab: error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED


if __name__ == "__main__":
    sys.exit(main())
