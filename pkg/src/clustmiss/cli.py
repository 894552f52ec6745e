"""``bench`` command line: run or validate experiment specs.

Exit codes: 0 success, 1 invalid spec, 2 runtime failure (partial report written).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bench import BenchRuntimeError, SpecError, emit, load_spec, plot_series, run

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def build_parser():
    parser = argparse.ArgumentParser(prog="bench", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment spec")
    p_run.add_argument("--spec", required=True, type=Path)
    p_run.add_argument("--out", required=True, type=Path, help="output directory")
    p_run.add_argument("--format", choices=("csv", "json"), default="csv")
    p_run.add_argument("--threads", type=int, default=1)

    p_val = sub.add_parser("validate", help="check a spec without running it")
    p_val.add_argument("--spec", required=True, type=Path)
    return parser


def _write(report, out, fmt):
    out.mkdir(parents=True, exist_ok=True)
    path = emit(report, fmt, out / f"report.{fmt}")
    (out / "series.csv").write_text(plot_series(report), encoding="utf-8")
    return path


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        spec = load_spec(args.spec)
    except SpecError as exc:
        for err in exc.errors:
            print(f"invalid spec: {err}", file=sys.stderr)
        return EXIT_INVALID

    if args.command == "validate":
        print(f"{args.spec}: ok ({spec.experiment}, {spec.trials} trials)")
        return EXIT_OK

    if args.threads < 1:
        print("invalid option: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        report = run(spec, threads=args.threads)
    except BenchRuntimeError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        try:
            path = _write(exc.partial, args.out, args.format)
            print(f"partial report: {path}", file=sys.stderr)
        except OSError as io_exc:
            print(str(io_exc), file=sys.stderr)
        return EXIT_RUNTIME
    try:
        path = _write(report, args.out, args.format)
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_RUNTIME
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
