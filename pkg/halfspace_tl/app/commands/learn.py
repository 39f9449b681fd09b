"""`learn`: boosted tester-learner on a dataset file.

A holdout part (at most `holdout` points, at most a tenth of the file) is set
aside first; the rest is pooled into trial chunks plus a selection chunk.
Exit code 0 on accept, 2 on reject.
"""
from __future__ import annotations

import argparse
import logging

from ..schemas.halfspace import LearnConfig
from ..services.core import derive_seed, empirical_error
from ..services.dataset_loader import read_dataset
from ..services.learner import PooledSource, boosted_learn, selection_size, trial_count
from ..services.synth import split
from .options import EXIT_OK, EXIT_REJECT

logger = logging.getLogger(__name__)

DEFAULT_HOLDOUT = 100_000


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("learn", parents=[parent], help="run the tester-learner on a dataset file")
    parser.add_argument("dataset", help="file written by gen (or in the same format)")
    parser.add_argument("--epsilon", type=float, default=0.05)
    parser.add_argument("--tau", type=float, default=0.05)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--holdout", type=int, default=DEFAULT_HOLDOUT)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = LearnConfig(epsilon=args.epsilon, tau=args.tau, seed=args.seed)
    S = read_dataset(args.dataset)

    hold = min(args.holdout, S.n // 10)
    if hold >= 1:
        train, holdout = split(S, [1.0 - hold / S.n, hold / S.n], derive_seed(config.seed, "learn_holdout"))
    else:
        train, holdout = S, None

    trials = trial_count(config.tau, config.max_trials)
    source = PooledSource(train, trials, selection_size(config, S.d), config.seed)
    outcome = boosted_learn(source, config)

    print(f"verdict: {outcome.verdict}")
    print(f"trials: {outcome.trials_run} run, {outcome.trials_rejected} rejected")
    if outcome.accepted:
        chosen = outcome.chosen
        print("chosen v: " + " ".join(f"{c:.17g}" for c in chosen.v))
        print(f"chosen t: {chosen.t:.17g}")
        print(f"selection error: {outcome.test_error:.4f}")
        if holdout is not None and holdout.n:
            print(f"holdout error: {empirical_error(chosen, holdout):.4f} ({holdout.n} points)")
    print(f"diagnostics: {len(outcome.diagnostics)}")
    for diagnostic in outcome.diagnostics:
        print(f"  {diagnostic}")
    for note in outcome.notes:
        print(f"  note: {note}")
    return EXIT_OK if outcome.accepted else EXIT_REJECT
