"""Command-line entry point: ``paa run``, ``paa list-problems``, ``paa verify``.

Exit codes: 0 success, 1 invalid experiment specification, 2 I/O failure.
``paa verify`` exits 1 when any acceptance check fails.
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .exceptions import InvalidSpec
from .problems import PROBLEMS

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


def _param(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected k=v, got {text!r}")
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paa", description="Preconditioned Anderson acceleration benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write CSV/summary files")
    run.add_argument("--config", help="flat key = value experiment file")
    run.add_argument("--problem", choices=sorted(PROBLEMS))
    run.add_argument("--param", action="append", type=_param, default=[], metavar="K=V",
                     help="problem parameter (repeatable)")
    run.add_argument("--precond", help="const:A | none | diag | block:B | full | linfull | lindiag")
    run.add_argument("--m", type=int)
    run.add_argument("--beta", type=float)
    run.add_argument("--n-update", type=int, dest="n_update")
    run.add_argument("--tol", type=float)
    run.add_argument("--max-iter", type=int, dest="max_iter")
    run.add_argument("--seed", type=int)
    run.add_argument("--runs", type=int)
    run.add_argument("--x0", help="ones | zeros | solution | comma-separated values")
    run.add_argument("--out")
    run.add_argument("--jobs", type=int, default=1, help="concurrent solves")
    run.add_argument("--quiet", action="store_true", help="do not print the summary table")

    sub.add_parser("list-problems", help="show the available problems and their defaults")
    sub.add_parser("verify", help="run the acceptance checks")
    return parser


def _cmd_run(args) -> int:
    try:
        if args.config:
            spec = harness.spec_from_entries(harness.read_config(args.config))
        elif args.problem:
            spec = harness.ExperimentSpec(problem=args.problem)
        else:
            raise InvalidSpec("give --config or --problem")
        spec = harness.apply_overrides(
            spec,
            problem=args.problem,
            params=dict(args.param),
            precond=args.precond,
            m=args.m,
            beta=args.beta,
            n_update=args.n_update,
            tol=args.tol,
            max_iter=args.max_iter,
            seed=args.seed,
            runs=args.runs,
            x0=args.x0,
            out=args.out,
        )
        records = harness.run_experiment(spec, jobs=args.jobs)
    except OSError as exc:
        if args.config:
            print(f"paa: cannot read {args.config}: {exc}", file=sys.stderr)
            return EXIT_IO
        raise
    except (InvalidSpec, ValueError) as exc:
        print(f"paa: invalid experiment: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        paths = harness.write_outputs(records, spec.out)
    except OSError as exc:
        print(f"paa: {exc}", file=sys.stderr)
        return EXIT_IO
    if not args.quiet:
        print(harness.summarize(records), end="")
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_list() -> int:
    for name, (factory, defaults) in PROBLEMS.items():
        params = ", ".join(f"{k}={v}" for k, v in defaults.items())
        doc = (factory.__doc__ or "").strip().splitlines()[0]
        print(f"{name:9s} {params:28s} {doc}")
    return EXIT_OK


def _cmd_verify() -> int:
    from .acceptance import run_all

    results = run_all(verbose=True)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_INVALID if failed else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "list-problems":
        return _cmd_list()
    return _cmd_verify()


if __name__ == "__main__":
    sys.exit(main())
