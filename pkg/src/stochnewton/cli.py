"""Command-line entry point: ``python -m stochnewton <subcommand> ...``.

Exit codes: 0 success, 1 validation error, 2 solver failure, 3 a
verification check failed.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import sys

import numpy as np

from . import harness
from .errors import SolverError, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3
DEFAULT_M_GRID = tuple(float(v) for v in np.logspace(-3, 3, 13))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="key = value config file")
    p.add_argument("--out", metavar="PATH", help="output file (stdout by default)")
    p.add_argument("--seed", type=int)
    p.add_argument("--method", choices=harness.METHODS)
    p.add_argument("--tau", type=int)
    p.add_argument("--M", type=float)
    p.add_argument("--lambda", dest="lam", metavar="X", help="number or 1/(Cn)")
    p.add_argument("--parts", type=int)
    p.add_argument("--x0", help="zeros, const:C, file:PATH or near:R")
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--tol", dest="stop_tol", type=float)
    p.add_argument("--norm", choices=("l2", "l3"))
    p.add_argument("--track-lyapunov", dest="track_lyapunov", action="store_true", default=None)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="any other config key, e.g. --set synth=logistic")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stochnewton", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in (("run", "run one method and write its CSV trace"),
                       ("compare", "run every [run] section on one problem, merged CSV"),
                       ("verify", "check the Lyapunov relations step by step"),
                       ("tune-m", "sweep M for scn or cubic_newton"),
                       ("solve-ref", "solve for x* and f* to high accuracy")):
        p = sub.add_parser(name, help=text)
        _common(p)
        if name == "verify":
            p.add_argument("--steps", type=int, default=30)
            p.add_argument("--mu-cert", dest="mu_cert", type=float)
            p.add_argument("--H-cert", dest="H_cert", type=float)
        if name == "tune-m":
            p.add_argument("--grid", help="comma-separated M values (default 13 log-spaced in [1e-3, 1e3])")
        if name in ("run", "compare"):
            p.add_argument("--no-timing", action="store_true", help="drop the wall_ms column")
    return parser


_OVERRIDES = ("seed", "method", "tau", "M", "lam", "parts", "x0", "max_iters", "stop_tol", "norm",
              "track_lyapunov")


def _configs(args) -> list:
    overrides = {k: getattr(args, k) for k in _OVERRIDES}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    return harness.load_configs(args.config, overrides)


def _single(args):
    configs = _configs(args)
    if len(configs) != 1:
        raise ValidationError(f"{args.command} takes one run, config has {len(configs)} [run] sections")
    return configs[0]


def _dispatch(args, out) -> int:
    if args.command == "run":
        harness.write_csv(harness.run(_single(args)), out, not args.no_timing)
        return EXIT_OK
    if args.command == "compare":
        harness.write_csv(harness.compare(_configs(args)), out, not args.no_timing)
        return EXIT_OK
    if args.command == "verify":
        report = harness.verify(_single(args), args.steps, args.mu_cert, args.H_cert)
        out.write("\n".join(report.lines()) + "\n")
        return EXIT_OK if report.ok else EXIT_VERIFY
    if args.command == "tune-m":
        try:
            grid = DEFAULT_M_GRID if args.grid is None else [float(v) for v in args.grid.split(",") if v.strip()]
        except ValueError:
            raise ValidationError(f"bad --grid {args.grid!r}") from None
        if not grid:
            raise ValidationError("M grid is empty")
        # the grid supplies M; any positive placeholder passes validation
        args.M = args.M or abs(grid[0]) or 1.0
        best, table = harness.tune_M(_single(args), grid)
        out.write("M,converged,epochs,f_sub,note\n")
        for r in table:
            epochs = "" if r.epochs is None else format(r.epochs, ".17g")
            out.write(f"{r.M:.17g},{int(r.converged)},{epochs},{r.f_sub:.17g},{r.note}\n")
        out.write(f"# best_M={best:.17g}\n")
        return EXIT_OK
    cfg = _single(args)
    ref = harness.reference_for(cfg, harness.build_problem(cfg))
    out.write(json.dumps({"f_star": ref.f_star, "grad_norm": ref.grad_norm, "iterations": ref.iterations,
                          "method": ref.method, "x_star": [float(v) for v in ref.x_star]}, indent=1) + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        with contextlib.ExitStack() as stack:
            out = stack.enter_context(open(args.out, "w", encoding="utf-8")) if args.out else sys.stdout
            return _dispatch(args, out)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SolverError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
