"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 comparison failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import BENCHMARKS, PARSERS, RunConfig
from .errors import ConfigError, SolverError
from .harness import OUTPUT_ROOT_ENV, compare, run

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_COMPARE = 0, 2, 3, 4


def _tolerance(text: str):
    try:
        col, rest = text.split("=", 1)
        parts = [float(v) for v in rest.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected COLUMN=RTOL[,ATOL], got {text!r}") from None
    return col, (parts[0], parts[1] if len(parts) > 1 else 0.0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fincell", description="Finite cell benchmarks.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a benchmark configuration")
    r.add_argument("config", help="INI configuration file")
    r.add_argument("--output-root", help=f"output root (default ${OUTPUT_ROOT_ENV} or ./results)")
    over = r.add_argument_group("overrides", "same names as the configuration keys")
    for key in PARSERS:
        if key == "benchmark":
            continue
        flags = [f"--{key}"] + ([f"--{key.replace('_', '-')}"] if "_" in key else [])
        over.add_argument(*flags, dest=f"set_{key}", metavar="VALUE")

    c = sub.add_parser("compare", help="compare a CSV against a golden CSV")
    c.add_argument("a")
    c.add_argument("b", help="reference file")
    c.add_argument("--rtol", type=float, default=1e-9)
    c.add_argument("--atol", type=float, default=0.0)
    c.add_argument("--tol", type=_tolerance, action="append", default=[], metavar="COLUMN=RTOL[,ATOL]")

    sub.add_parser("list-benchmarks", help="list benchmark ids")
    return ap


def _cmd_run(args) -> int:
    try:
        cfg = RunConfig.from_file(args.config)
        overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("set_") and v is not None}
        cfg = cfg.with_overrides(overrides)
        report = run(cfg, args.output_root)
    except ConfigError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        print(f"config error{key}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc} {exc.diagnostics}", file=sys.stderr)
        return EXIT_SOLVER
    for path in report.files:
        print(path)
    print(f"status: {report.status}")
    for f in report.failures:
        print(f"  failure: {f}")
    return EXIT_SOLVER if report.solver_failed else EXIT_OK


def _cmd_compare(args) -> int:
    try:
        verdict = compare(args.a, args.b, args.rtol, args.atol, dict(args.tol))
    except OSError as exc:
        print(f"cannot read {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_COMPARE
    print(json.dumps(verdict.to_dict(), indent=2))
    return EXIT_OK if verdict.passed else EXIT_COMPARE


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list-benchmarks":
        for name, text in BENCHMARKS.items():
            print(f"{name:18s} {text}")
        return EXIT_OK
    if args.command == "compare":
        return _cmd_compare(args)
    return _cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
