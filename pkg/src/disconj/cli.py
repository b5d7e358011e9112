"""Command line front end: ``disconj check|interval|trace|green <file>``.

Problem files are JSON::

    {"order": 4, "coefficients": ["0", "50", "0", "0"],
     "interval": [0, 1], "m_ref": 200,
     "solver": {"grid_nodes": 2048, "scan_radius": 1e6}}

Exit codes: 0 ok, 1 bad input, 2 not disconjugate or sign check failed,
3 numerical failure, 4 inconclusive eigenvalue scan, 5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import jsonschema

from . import __version__
from .coeffexpr import ExprError, parse
from .eigensolve import default_radius, default_step, interval_from_spectrum, spectrum
from .errors import (
    AmbiguousZeroError,
    InconclusiveScanError,
    IntegrationError,
    MultiplicityError,
    NotDisconjugateError,
    ProblemError,
    SingularBoundaryError,
)
from .greenfn import DEFAULT_MESH, DEFAULT_SIGN_TOL, build_green, verify_sign
from .odecore import GridSpec, ProblemDef, integrate_fundamental
from .wronskian import DEFAULT_TOL, is_disconjugate, trace

log = logging.getLogger("disconj")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_VERDICT = 2
EXIT_NUMERIC = 3
EXIT_INCONCLUSIVE = 4
EXIT_IO = 5

_NUMERIC_ERRORS = (IntegrationError, AmbiguousZeroError, MultiplicityError, SingularBoundaryError)

PROBLEM_SCHEMA = {
    "type": "object",
    "required": ["order", "coefficients", "interval", "m_ref"],
    "additionalProperties": False,
    "properties": {
        "order": {"type": "integer", "minimum": 2},
        "coefficients": {"type": "array", "items": {"type": "string"}},
        "interval": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "m_ref": {"type": "number"},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "abs_tol": {"type": "number", "exclusiveMinimum": 0},
                "rel_tol": {"type": "number", "exclusiveMinimum": 0},
                "grid_nodes": {"type": "integer", "minimum": 64},
                "scan_radius": {"type": "number", "exclusiveMinimum": 0},
                "scan_step": {"type": "number", "exclusiveMinimum": 0},
                "green_mesh": {"type": "integer", "minimum": 4},
            },
        },
    },
}


class InputError(Exception):
    pass


class OutputError(Exception):
    pass


@dataclass(frozen=True)
class ProblemFile:
    problem: ProblemDef
    grid: GridSpec
    scan_radius: Optional[float]
    scan_step: Optional[float]
    green_mesh: int
    raw: dict


def load_problem(path: str) -> ProblemFile:
    """Read, validate and parse a problem file.

    Raises:
        InputError: the document is not valid JSON, violates the schema or
            holds an unparsable coefficient.
        OutputError: the file cannot be read.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        jsonschema.validate(doc, PROBLEM_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise InputError(f"{path}: {where}: {exc.message}") from exc

    n = doc["order"]
    if len(doc["coefficients"]) != n:
        raise InputError(f"{path}: order {n} needs {n} coefficients, got {len(doc['coefficients'])}")
    exprs = []
    for i, src in enumerate(doc["coefficients"], start=1):
        try:
            exprs.append(parse(src))
        except ExprError as exc:
            raise InputError(f"{path}: coefficients/{i - 1} (a_{i} = {src!r}): {exc}") from exc
    solver = doc.get("solver", {})
    try:
        a, b = (float(x) for x in doc["interval"])
        problem = ProblemDef(n, tuple(exprs), a, b, float(doc["m_ref"]))
        grid = GridSpec(
            nodes=solver.get("grid_nodes", GridSpec.nodes),
            atol=solver.get("abs_tol", GridSpec.atol),
            rtol=solver.get("rel_tol", GridSpec.rtol),
        )
    except ProblemError as exc:
        raise InputError(f"{path}: {exc}") from exc
    except ExprError as exc:
        raise InputError(f"{path}: coefficient cannot be evaluated: {exc}") from exc
    return ProblemFile(
        problem,
        grid,
        solver.get("scan_radius"),
        solver.get("scan_step"),
        solver.get("green_mesh", DEFAULT_MESH),
        doc,
    )


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False)


def _finite(x):
    return x if x is not None and math.isfinite(x) else None


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {out}: {exc.strerror or exc}") from exc


def _check_k(pf: ProblemFile, k: int) -> None:
    n = pf.problem.n
    if not 1 <= k <= n - 1:
        raise InputError(f"--k must lie in 1..{n - 1} for an order-{n} problem, got {k}")


def cmd_check(pf: ProblemFile, args) -> int:
    M = pf.problem.M_ref if args.at is None else args.at
    report = is_disconjugate(pf.problem, M, pf.grid, tol=args.tol)
    _emit(_json(report.to_dict()) + "\n", args.out)
    return EXIT_OK if report.disconjugate else EXIT_VERDICT


def _record(r) -> Optional[dict]:
    return None if r is None else r.to_dict()


def cmd_interval(pf: ProblemFile, args) -> int:
    p = pf.problem
    radius = args.radius if args.radius is not None else pf.scan_radius
    step = args.step if args.step is not None else pf.scan_step
    radius = default_radius(p) if radius is None else radius
    step = default_step(p) if step is None else step
    started = time.perf_counter()

    report = {
        "tool": "disconj",
        "version": __version__,
        "input": pf.raw,
        "settings": {
            "grid_nodes": pf.grid.nodes,
            "abs_tol": pf.grid.atol,
            "rel_tol": pf.grid.rtol,
            "scan_radius": radius,
            "scan_step": step,
        },
    }
    verdict = is_disconjugate(p, p.M_ref, pf.grid, tol=args.tol)
    report["disconjugacy_at_m_ref"] = verdict.to_dict()
    code = EXIT_OK
    if not verdict.disconjugate:
        report["error"] = str(NotDisconjugateError(verdict))
        code = EXIT_VERDICT
    else:
        spec = spectrum(p, radius, step, pf.grid, check=False)
        report["eigenvalues"] = [
            {
                "k": k,
                "parity": "even" if (p.n - k) % 2 == 0 else "odd",
                "positive": _record(pos),
                "negative": _record(neg),
            }
            for k, (pos, neg) in sorted(spec.items())
        ]
        try:
            report["interval"] = interval_from_spectrum(p, spec, radius).to_dict()
        except InconclusiveScanError as exc:
            report["error"] = str(exc)
            code = EXIT_INCONCLUSIVE
    report["timing"] = {"seconds": round(time.perf_counter() - started, 3)}
    _emit(_json(report) + "\n", args.out)
    return code


def cmd_trace(pf: ProblemFile, args) -> int:
    _check_k(pf, args.k)
    M = pf.problem.M_ref if args.at is None else args.at
    fs = integrate_fundamental(pf.problem, M, pf.grid)
    tr = trace(fs, args.k, tol=args.tol)
    lines = ["t,W"] + [f"{float(t)!r},{float(w)!r}" for t, w in zip(tr.t, tr.values)]
    _emit("\n".join(lines) + "\n", args.out)
    if args.out is not None:
        summary = {"k": tr.k, "M": tr.M, "zeros": [{"t": z.t, "kind": z.kind} for z in tr.zeros]}
        sys.stdout.write(_json(summary) + "\n")
    return EXIT_OK


def cmd_green(pf: ProblemFile, args) -> int:
    _check_k(pf, args.k)
    M = pf.problem.M_ref if args.at is None else args.at
    mesh = args.mesh if args.mesh is not None else pf.green_mesh
    tol = args.tol if args.tol is not None else DEFAULT_SIGN_TOL
    gg = build_green(pf.problem, M, args.k, mesh, pf.grid)
    report = verify_sign(gg, tol)
    if args.out is not None:
        try:
            gg.to_csv(args.out)
        except OSError as exc:
            raise OutputError(f"cannot write {args.out}: {exc.strerror or exc}") from exc
    body = report.to_dict()
    body["bc_residual"] = float(gg.bc_residuals.max())
    body["jump_defect"] = float(abs(gg.jumps - 1.0).max())
    sys.stdout.write(_json({k: _finite(v) if isinstance(v, float) else v for k, v in body.items()}) + "\n")
    return EXIT_OK if report.passed else EXIT_VERDICT


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors (exit 1), not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="disconj", description="Disconjugacy intervals of linear ODEs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, *, at=True, k=False, out_help="write output here instead of stdout"):
        p.add_argument("file", help="JSON problem file")
        if at:
            p.add_argument("--at", type=float, help="parameter M (default: m_ref)")
        if k:
            p.add_argument("--k", type=int, required=True, help="Wronskian / boundary index, 1..n-1")
        p.add_argument("--out", help=out_help)

    p = sub.add_parser("check", help="decide disconjugacy at one M")
    common(p)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="relative zero tolerance")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("interval", help="eigenvalues and the disconjugacy interval")
    common(p, at=False)
    p.add_argument("--radius", type=float, help="largest |M - m_ref| scanned")
    p.add_argument("--step", type=float, help="initial scan spacing in M")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="relative zero tolerance")
    p.set_defaults(func=cmd_interval)

    p = sub.add_parser("trace", help="CSV of W_k over [a, b]")
    common(p, k=True, out_help="CSV path (default: stdout)")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="relative zero tolerance")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("green", help="Green's function grid and sign check")
    common(p, k=True, out_help="CSV path for the (t, s, g) grid")
    p.add_argument("--mesh", type=int, help=f"grid size (default {DEFAULT_MESH})")
    p.add_argument("--tol", type=float, help=f"sign tolerance (default {DEFAULT_SIGN_TOL})")
    p.set_defaults(func=cmd_green)
    return parser


def _validate_args(args) -> None:
    for name in ("radius", "step", "tol"):
        v = getattr(args, name, None)
        if v is not None and not (math.isfinite(v) and v > 0):
            raise InputError(f"--{name} must be a positive number")
    at = getattr(args, "at", None)
    if at is not None and not math.isfinite(at):
        raise InputError("--at must be finite")
    mesh = getattr(args, "mesh", None)
    if mesh is not None and mesh < 4:
        raise InputError("--mesh must be at least 4")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        _validate_args(args)
        pf = load_problem(args.file)
        log.info("loaded order-%d problem on [%g, %g]", pf.problem.n, pf.problem.a, pf.problem.b)
        return args.func(pf, args)
    except InputError as exc:
        print(f"disconj: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ExprError as exc:
        # a coefficient left its domain somewhere on [a, b]
        print(f"disconj: input error: coefficient: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OutputError as exc:
        print(f"disconj: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NotDisconjugateError as exc:
        print(f"disconj: {exc}", file=sys.stderr)
        return EXIT_VERDICT
    except InconclusiveScanError as exc:
        print(f"disconj: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except _NUMERIC_ERRORS as exc:
        print(f"disconj: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
