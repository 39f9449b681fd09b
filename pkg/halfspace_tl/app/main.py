"""Command-line entry point.

    python -m halfspace_tl.app.main <gen|learn|sweep|selftest> [flags]

Exit codes: 0 success or accept, 1 usage/config/IO/format error, 2 tester rejection.
"""
from __future__ import annotations

import logging
import sys
from typing import Optional, Sequence

from dotenv import load_dotenv
from pydantic import ValidationError

from .commands import gen, learn, selftest, sweep
from .commands.options import EXIT_USAGE, CliParser, UsageError, common_parent
from .services.core import HalfspaceError
from .services.dataset_loader import DatasetFormatError
from .services.learner import PooledSourceError
from .services.synth import NoiseBudgetError, SplitError
from .services.testers import TesterConfigError

# Load .env before anything else so HALFSPACE_TL_WORKERS is visible to sweep
load_dotenv()

logger = logging.getLogger("halfspace_tl")

USER_ERRORS = (
    UsageError,
    ValidationError,
    OSError,
    DatasetFormatError,
    PooledSourceError,
    NoiseBudgetError,
    SplitError,
    TesterConfigError,
    HalfspaceError,
)


def build_parser() -> CliParser:
    parser = CliParser(prog="halfspace_tl", description="Testable learning of general halfspaces under Gaussian marginals")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)
    parent = common_parent()
    for command in (gen, learn, sweep, selftest):
        command.register(subparsers, parent)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level,
        format="%(asctime)s %(levelname)s %(name)s - %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except USER_ERRORS as e:
        logger.debug("command %s failed", args.command, exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
