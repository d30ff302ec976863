"""Command-line entry point (git-style subcommands).

Exit codes: 0 success, 2 abort with certificate, 3 precondition failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .analysis import threshold_report
from .fixtures import BUILTINS, default_shape
from .formats import (FormatError, condition1_to_json, dumps, function_from_json, function_to_json,
                      marginal_from_json, marginal_to_json, read_json)
from .marginals import EXACT, MODES, Tolerance, fourier_coefficient
from .oracle import OracleError, l0_oracle, l1_witness
from .randmodel import (CONDITION1, FULL, ContinuousValues, IntegerValues, RandomModelSpec, Schedule,
                        SweepSpec, run_sweep, sample_function, shape_for)
from .sparsestfit import EXACT_LI_CAP, check_condition1, recover
from .symgroup import CapExceeded, LambdaShape, check_cap

EXIT_OK, EXIT_ABORT, EXIT_PRECONDITION = 0, 2, 3


class Abort(Exception):
    """A pipeline stopped with a certificate (exit code 2)."""

    def __init__(self, payload: dict):
        super().__init__(payload.get("detail", "aborted"))
        self.payload = payload


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _shape(text: str, n: int | None = None) -> LambdaShape:
    shape = shape_for(text, n) if n is not None and "n" in text else LambdaShape.parse(text)
    if n is not None and shape.n != n:
        raise ValueError(f"shape ({shape}) is not a partition of n = {n}")
    return shape


def _tol(args) -> Tolerance:
    if args.abs_tol < 0 or args.rel_tol < 0:
        raise ValueError("tolerances must be non-negative")
    return Tolerance(args.abs_tol, args.rel_tol)


def _values(args):
    if args.T is not None:
        if args.a is not None or args.b is not None:
            raise ValueError("give either --T (integer values) or --a/--b (continuous values)")
        return IntegerValues(args.T)
    return ContinuousValues(1.0 if args.a is None else args.a, 2.0 if args.b is None else args.b)


def cmd_marginal(args) -> int:
    f = function_from_json(read_json(args.input))
    shape = _shape(args.shape, f.n)
    check_cap(shape, args.cap_dlambda)
    _emit(dumps(marginal_to_json(fourier_coefficient(f, shape, args.cap_dlambda))), args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    f = function_from_json(read_json(args.input))
    shape = _shape(args.shape, f.n)
    report = check_condition1(f, shape, args.exact_li_cap, args.cap_dlambda)
    _emit(dumps(condition1_to_json(report, f)), args.out)
    return EXIT_OK


def cmd_recover(args) -> int:
    M = marginal_from_json(read_json(args.marginal), args.mode)
    check_cap(M.shape, args.cap_dlambda)
    result = recover(M, _tol(args), args.engine)
    if not result.recovered:
        raise Abort(result.certificate.to_json())
    _emit(dumps(function_to_json(result.function)), args.out)
    return EXIT_OK


def cmd_oracle_l0(args) -> int:
    M = marginal_from_json(read_json(args.marginal), EXACT)
    solutions = l0_oracle(M, args.kmax)
    payload = {"support_size": solutions[0].K, "unique": len(solutions) == 1,
               "solutions": [function_to_json(g) for g in solutions]}
    _emit(dumps(payload), args.out)
    return EXIT_OK


def cmd_l1_witness(args) -> int:
    f = function_from_json(read_json(args.input))
    shape = _shape(args.shape, f.n)
    check_cap(shape, args.cap_dlambda)
    g = l1_witness(f, shape)
    if g is None:
        raise Abort({"stage": "l1-witness", "detail": "no certified equal-l1 alternative found"})
    _emit(dumps(function_to_json(g)), args.out)
    return EXIT_OK


def cmd_sample(args) -> int:
    spec = RandomModelSpec(args.n, args.k, _values(args), args.seed)
    f = sample_function(spec)
    _emit(dumps(function_to_json(f)), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.threads < 1:
        raise ValueError("--threads must be at least 1")
    schedules = [Schedule.formula(s) for s in args.schedule or []]
    if args.k:
        schedules.append(Schedule.values(args.k))
    if not schedules:
        raise ValueError("give at least one --schedule or --k")
    spec = SweepSpec(args.shape, tuple(args.n), tuple(schedules), args.trials, args.mode, args.seed,
                     _values(args), _tol(args))
    for n, shape, _, _ in spec.grid():
        check_cap(shape, args.cap_dlambda)
    result = run_sweep(spec, workers=args.threads)
    _emit(result.to_csv(timing=not args.no_timing), args.out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    shape = _shape(args.shape, args.n)
    report = threshold_report(shape, args.epsilon, args.T, args.constant, args.C, args.C_prime, args.m_cap)
    _emit(dumps(report.to_json()), args.out)
    return EXIT_OK


def cmd_fixture(args) -> int:
    f = BUILTINS[args.name](args.n)
    payload = function_to_json(f)
    if args.with_marginal:
        payload = {"function": payload, "marginal": marginal_to_json(fourier_coefficient(f, default_shape(args.n)))}
    _emit(dumps(payload), args.out)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors are precondition failures (exit 3), not aborts."""

    json_errors = False

    def error(self, message):
        if _Parser.json_errors:
            sys.stderr.write(json.dumps({"error": "usage", "message": message}) + "\n")
        else:
            self.print_usage(sys.stderr)
            sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_PRECONDITION)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json-errors", action="store_true", help="write diagnostics to stderr as JSON")
    common.add_argument("--cap-dlambda", type=int, default=None, metavar="N",
                        help="refuse shapes with D_lambda above N (default 10^6)")
    common.add_argument("--out", default=None, help="output file (default stdout)")

    tol = argparse.ArgumentParser(add_help=False)
    tol.add_argument("--abs-tol", type=float, default=1e-12)
    tol.add_argument("--rel-tol", type=float, default=1e-9)

    values = argparse.ArgumentParser(add_help=False)
    values.add_argument("--a", type=float, default=None, help="continuous values: lower end (default 1)")
    values.add_argument("--b", type=float, default=None, help="continuous values: upper end (default 2)")
    values.add_argument("--T", type=int, default=None, help="integer values uniform on 1..T (exact mode)")

    parser = _Parser(prog="permsparse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("marginal", parents=[common], help="function file -> marginal file")
    p.add_argument("--input", required=True)
    p.add_argument("--shape", required=True, help='e.g. "3,1"')
    p.set_defaults(func=cmd_marginal)

    p = sub.add_parser("check", parents=[common], help="Condition 1 report for a function")
    p.add_argument("--input", required=True)
    p.add_argument("--shape", required=True)
    p.add_argument("--exact-li-cap", type=int, default=EXACT_LI_CAP)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("recover", parents=[common, tol], help="marginal file -> function file")
    p.add_argument("--marginal", required=True)
    p.add_argument("--mode", choices=MODES, default=EXACT)
    p.add_argument("--engine", choices=("auto", "core", "structured"), default="auto")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("oracle", help="brute-force ground truth")
    osub = p.add_subparsers(dest="oracle", required=True, parser_class=_Parser)
    q = osub.add_parser("l0", parents=[common], help="all sparsest exact solutions (n <= 5)")
    q.add_argument("--marginal", required=True)
    q.add_argument("--kmax", type=int, default=4)
    q.set_defaults(func=cmd_oracle_l0)
    q = osub.add_parser("l1-witness", parents=[common], help="an alternative with equal marginal and l1 norm")
    q.add_argument("--input", required=True)
    q.add_argument("--shape", required=True)
    q.set_defaults(func=cmd_l1_witness)

    p = sub.add_parser("l1-witness", parents=[common], help="same as 'oracle l1-witness'")
    p.add_argument("--input", required=True)
    p.add_argument("--shape", required=True)
    p.set_defaults(func=cmd_l1_witness)

    p = sub.add_parser("sample", parents=[common, values], help="draw a random sparse function")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("sweep", parents=[common, tol, values], help="Monte Carlo success rates as CSV")
    p.add_argument("--shape", required=True, help='template in n, e.g. "n-1,1"')
    p.add_argument("--n", type=int, nargs="+", required=True)
    p.add_argument("--schedule", action="append", help='K formula, e.g. "0.5*n*log(n)"; repeatable')
    p.add_argument("--k", type=int, nargs="+", help="explicit K values")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--mode", choices=(CONDITION1, FULL), default=CONDITION1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--no-timing", action="store_true", help="leave the seconds column blank")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", parents=[common], help="threshold calculators as JSON")
    p.add_argument("--shape", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--constant", type=float, default=3.0)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--C-prime", dest="C_prime", type=float, default=1.0)
    p.add_argument("--m-cap", type=int, default=4)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fixture", parents=[common], help="built-in worked examples")
    p.add_argument("name", choices=sorted(BUILTINS))
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--with-marginal", action="store_true", help="also emit the (n-1,1) marginal")
    p.set_defaults(func=cmd_fixture)
    return parser


def _report(args, kind: str, payload: dict) -> None:
    if getattr(args, "json_errors", False):
        sys.stderr.write(json.dumps({"error": kind, **payload}) + "\n")
    else:
        detail = payload.get("detail") or payload.get("message")
        stage = f" [{payload['stage']}]" if "stage" in payload else ""
        sys.stderr.write(f"permsparse: {kind}{stage}: {detail}\n")


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    _Parser.json_errors = "--json-errors" in argv
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Abort as exc:
        _report(args, "abort", exc.payload)
        if args.command == "recover" and args.out:
            # the certificate replaces the output file
            Path(args.out).write_text(dumps(exc.payload), encoding="utf-8")
        return EXIT_ABORT
    except (CapExceeded, FormatError, OracleError, OverflowError, ValueError, OSError) as exc:
        _report(args, "precondition", {"type": type(exc).__name__, "message": str(exc)})
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
