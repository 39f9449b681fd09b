"""`gen`: write one synthetic dataset and report its realized noise level."""
from __future__ import annotations

import argparse
import logging

from ..services.dataset_loader import write_dataset
from ..services.synth import generate_with_report
from .options import EXIT_OK, UsageError, add_experiment_flags, resolve_config

logger = logging.getLogger(__name__)

DEFAULT_OUT = "dataset.txt"


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("gen", parents=[parent], help="generate a labeled dataset file")
    add_experiment_flags(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    if len(config.budgets) != 1 or len(config.thresholds) != 1:
        raise UsageError("gen takes exactly one --budget and one --threshold")
    budget, threshold = config.budgets[0], config.thresholds[0]

    S, report = generate_with_report(
        config.d,
        config.n,
        config.marginal,
        config.truth(threshold),
        config.noise(budget),
        config.seed,
    )
    out = config.out or DEFAULT_OUT
    write_dataset(S, out)

    print(f"wrote {out}")
    print(f"realized opt = {report.realized_flips / S.n:.3f}")
    print(f"label mass +1 = {S.label_mass(1):.4f}")
    print(f"label mass -1 = {S.label_mass(-1):.4f}")
    if report.shortfall:
        print(f"adversary shortfall = {report.shortfall} flips")
    return EXIT_OK
