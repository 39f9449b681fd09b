"""`selftest`: run the property suite, one PASS/FAIL line per property."""
from __future__ import annotations

import argparse

from ..services.selftest import run_selftest
from .options import EXIT_OK, EXIT_USAGE


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("selftest", parents=[parent], help="check the library's invariants")
    parser.add_argument("--seed", type=int, default=0)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    results = run_selftest(args.seed)
    for result in results:
        print(result.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} of {len(results)} properties failed: {', '.join(failed)}")
        return EXIT_USAGE
    print(f"all {len(results)} properties passed")
    return EXIT_OK
