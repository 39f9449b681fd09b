"""Flags and config-file handling shared by the subcommands.

A config file is KEY=VALUE lines (python-dotenv syntax). Keys are the
ExperimentConfig field names, case-insensitive; unknown keys are an error.
Flags given on the command line override the file.
"""
from __future__ import annotations

import argparse
import os
import sys
from typing import Any, NoReturn, Optional

from dotenv import dotenv_values

from ..schemas.experiment import ExperimentConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_REJECT = 2

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

# flag dest -> ExperimentConfig field
_OVERRIDES = {
    "d": "d",
    "n": "n",
    "epsilon": "epsilon",
    "tau": "tau",
    "seed": "seed",
    "budget": "budgets",
    "threshold": "thresholds",
    "adversary": "adversary",
    "marginal": "marginal",
    "direction": "direction",
    "trials": "trials",
    "holdout": "holdout",
    "out": "out",
}


class UsageError(Exception):
    pass


class CliParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def common_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--log-level", default=os.getenv("LOG_LEVEL", "INFO").upper(), choices=LOG_LEVELS, type=str.upper)
    return parent


def add_experiment_flags(parser: argparse.ArgumentParser, *, sweep: bool = False) -> None:
    parser.add_argument("--config", help="KEY=VALUE experiment file")
    parser.add_argument("--d", type=int)
    parser.add_argument("--n", type=int)
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--tau", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--budget", help="opt budget; comma list for sweeps")
    parser.add_argument("--threshold", help="truth threshold t*; comma list for sweeps")
    parser.add_argument("--adversary", choices=("boundary", "tail", "random"))
    parser.add_argument("--marginal", help="standard_gaussian | scaled_gaussian:<f> | two_point:<s> | uniform_cube:<h>")
    parser.add_argument("--direction", help="e<k> or comma-separated coordinates")
    parser.add_argument("--out")
    if sweep:
        parser.add_argument("--trials", type=int)
        parser.add_argument("--holdout", type=int, help="fresh holdout points per trial")
        parser.add_argument("--boost", action="store_true", default=None, help="run boosted_learn per trial")
        parser.add_argument("--record-seconds", action="store_true", default=None, help="fill the CSV seconds column")


def read_config_file(path: str) -> dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            values = dotenv_values(stream=fh)
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e}") from e
    return {key.lower(): value for key, value in values.items() if value is not None}


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """File values first, then every flag that was given. Raises pydantic ValidationError."""
    values: dict[str, Any] = read_config_file(args.config) if getattr(args, "config", None) else {}
    for dest, field in _OVERRIDES.items():
        flag = getattr(args, dest, None)
        if flag is not None:
            values[field] = flag
    for dest in ("boost", "record_seconds"):
        if getattr(args, dest, None):
            values[dest] = True
    return ExperimentConfig(**values)


def format_float(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.17g}"
