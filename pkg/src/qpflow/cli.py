"""
Command line entry point: ``qpflow solve | check | oracle``.

Exit codes:

    0  solve certified / check passed / oracle finished
    1  check found a violated inequality
    2  solve stopped at its iteration cap without a certificate
    3  infeasible demands
    4  unreadable instance file or invalid arguments
    5  instance too large for the oracle
"""

from __future__ import annotations

import argparse
import json
import sys

from .driver import DriverConfig, solve
from .errors import InfeasibleInstanceError, InstanceFormatError, ParameterError, SizeLimitError
from .io import emit_report, parse_instance
from .lemmas import validate_lemmas
from .oracle import oracle_solve
from .subsolver import SubsolverConfig

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_UNCERTIFIED = 2
EXIT_INFEASIBLE = 3
EXIT_PARSE = 4
EXIT_TOO_LARGE = 5


class _Parser(argparse.ArgumentParser):
    """Argument errors exit with the parse-error code instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def _grid(values):
    out = []
    for v in values:
        out.extend(float(x) for x in str(v).split(",") if x.strip())
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qpflow", description="High-accuracy l_{q,p}-norm multicommodity flow.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="run the refinement solver on an instance file")
    s.add_argument("--input", required=True, help="instance file")
    s.add_argument("--q", type=float, required=True, help="inner norm exponent, 1 < q <= 2")
    s.add_argument("--p", type=float, required=True, help="outer exponent, p >= 2")
    s.add_argument("--eps", type=float, default=1e-3, help="target accuracy: E(F) <= (1 + eps) OPT + eps")
    s.add_argument("--max-iters", type=int, default=None, help="outer iteration cap")
    s.add_argument(
        "--inner-tol", type=float, default=SubsolverConfig.inner_tol, help="per-commodity residual suboptimality"
    )
    s.add_argument("--threads", type=int, default=None, help="commodity workers (default: QPFLOW_THREADS or 1)")
    s.add_argument("--output", default=None, help="report path (default: stdout)")
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.add_argument("--seed", type=int, default=0, help="recorded in the report; the solver itself is deterministic")
    s.add_argument("--no-timings", action="store_true", help="record zero timings for byte-reproducible reports")
    s.add_argument("--no-extrapolate", action="store_true", help="take plain unit steps F <- F + X")

    c = sub.add_parser("check", help="run the seeded inequality validation suite")
    c.add_argument("--q-grid", nargs="+", default=["1.1,1.5,2"])
    c.add_argument("--p-grid", nargs="+", default=["2,3,4"])
    c.add_argument("--k-grid", nargs="+", default=["1,2,4,8"])
    c.add_argument("--samples", type=int, default=10_000)
    c.add_argument("--seed", type=int, default=0)

    o = sub.add_parser("oracle", help="brute-force reference solve (m <= 200, k <= 4)")
    o.add_argument("--input", required=True)
    o.add_argument("--q", type=float, required=True, help="inner norm exponent, 1 < q <= 2")
    o.add_argument("--p", type=float, required=True, help="outer exponent, p >= 2")
    o.add_argument("--method", choices=("lbfgs", "pgd", "best"), default="lbfgs")
    return parser


def _solve(args) -> int:
    instance = parse_instance(args.input, args.q, args.p, args.eps)
    cfg = DriverConfig(
        eps=args.eps,
        max_outer_iters=args.max_iters,
        subsolver=SubsolverConfig(inner_tol=args.inner_tol),
        threads=args.threads,
        record_timings=not args.no_timings,
        extrapolate=not args.no_extrapolate,
    )
    _, report = solve(instance, cfg)
    report.params["seed"] = args.seed
    text = emit_report(report, args.format, args.output)
    if args.output is None:
        sys.stdout.write(text)
    print(
        f"{report.terminated}: objective={report.objective!r} gap_bound={report.gap_bound!r} "
        f"iterations={report.iterations}",
        file=sys.stderr,
    )
    return EXIT_OK if report.certified else EXIT_UNCERTIFIED


def _check(args) -> int:
    report = validate_lemmas(
        _grid(args.q_grid),
        _grid(args.p_grid),
        [int(k) for k in _grid(args.k_grid)],
        samples=args.samples,
        seed=args.seed,
    )
    print(report.format_text())
    return EXIT_OK if report.ok else EXIT_CHECK_FAILED


def _oracle(args) -> int:
    instance = parse_instance(args.input, args.q, args.p)
    res = oracle_solve(instance, method=args.method)
    out = {
        "objective": res.objective,
        "iterations": res.iterations,
        "stagnated": res.stagnated,
        "method": args.method,
    }
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"solve": _solve, "check": _check, "oracle": _oracle}[args.command]
    try:
        return handler(args)
    except InfeasibleInstanceError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InstanceFormatError, ParameterError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SizeLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOO_LARGE
    except ValueError as exc:
        # grid or sample-count problems in `check`
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
