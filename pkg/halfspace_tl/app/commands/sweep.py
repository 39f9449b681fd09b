"""`sweep`: (budget, t*) grid x trials, one CSV row per trial plus a JSON summary.

Each trial's seed is derive_seed(seed, "sweep", budget_index, threshold_index, trial),
so the rows do not depend on the worker count (HALFSPACE_TL_WORKERS) or on
the order trials finish in.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from itertools import product
from typing import Optional

import numpy as np

from ..schemas.experiment import ErrorQuantiles, ExperimentConfig, SweepCellSummary, SweepRow, SweepSummary
from ..services.core import derive_seed, empirical_error
from ..services.learner import SyntheticSource, boosted_learn, testable_learn
from ..services.synth import flip_count, generate
from .options import EXIT_OK, UsageError, add_experiment_flags, format_float, resolve_config

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("budget", "t_star", "trial", "verdict", "threshold", "error", "seconds")
DEFAULT_STEM = "sweep"


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("sweep", parents=[parent], help="error-vs-opt experiment grid")
    add_experiment_flags(parser, sweep=True)
    parser.set_defaults(handler=run)


def worker_count() -> int:
    raw = os.getenv("HALFSPACE_TL_WORKERS", "1").strip()
    try:
        workers = int(raw)
    except ValueError:
        raise UsageError(f"HALFSPACE_TL_WORKERS must be a positive integer, got {raw!r}") from None
    if workers < 1:
        raise UsageError(f"HALFSPACE_TL_WORKERS must be a positive integer, got {raw!r}")
    return workers


def run_trial(config: ExperimentConfig, budget_index: int, threshold_index: int, trial: int) -> SweepRow:
    budget = config.budgets[budget_index]
    t_star = config.thresholds[threshold_index]
    seed = derive_seed(config.seed, "sweep", budget_index, threshold_index, trial)
    truth = config.truth(t_star)
    noise = config.noise(budget)
    learn_config = config.learn_config(seed)

    started = time.perf_counter()
    if config.boost:
        source = SyntheticSource(config.d, config.n, config.marginal, truth, noise, seed)
        outcome = boosted_learn(source, learn_config)
    else:
        S = generate(config.d, config.n, config.marginal, truth, noise, derive_seed(seed, "sample"))
        outcome = testable_learn(S, learn_config)

    error: Optional[float] = None
    threshold: Optional[float] = None
    if outcome.accepted:
        holdout = generate(config.d, config.holdout, config.marginal, truth, noise, derive_seed(seed, "holdout"))
        error = empirical_error(outcome.chosen, holdout)
        threshold = outcome.chosen.t
    seconds = time.perf_counter() - started
    logger.info(
        "cell budget=%g t*=%g trial %d: %s error=%s (%.1fs)",
        budget,
        t_star,
        trial,
        "accept" if outcome.accepted else "reject",
        "-" if error is None else f"{error:.4f}",
        seconds,
    )
    return SweepRow(
        budget=budget,
        t_star=t_star,
        trial=trial,
        verdict="accept" if outcome.accepted else "reject",
        threshold=threshold,
        error=error,
        seconds=seconds,
        diagnostic="" if outcome.accepted else str(outcome.verdict.diagnostic),
    )


def _run_star(job: tuple[ExperimentConfig, int, int, int]) -> SweepRow:
    return run_trial(*job)


def run_grid(config: ExperimentConfig, workers: int = 1) -> list[SweepRow]:
    jobs = [
        (config, bi, ti, trial)
        for bi, ti, trial in product(range(len(config.budgets)), range(len(config.thresholds)), range(config.trials))
    ]
    if workers <= 1:
        return [_run_star(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_star, jobs))


def write_csv(rows: list[SweepRow], path: str, record_seconds: bool) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    format_float(row.budget),
                    format_float(row.t_star),
                    row.trial,
                    row.verdict,
                    format_float(row.threshold),
                    format_float(row.error),
                    f"{row.seconds:.3f}" if record_seconds else "",
                ]
            )


def _quantiles(errors: list[float]) -> Optional[ErrorQuantiles]:
    if not errors:
        return None
    q10, q50, q90 = np.quantile(np.asarray(errors), [0.1, 0.5, 0.9])
    return ErrorQuantiles(q10=float(q10), q50=float(q50), q90=float(q90))


def summarize(config: ExperimentConfig, rows: list[SweepRow]) -> SweepSummary:
    cells = []
    for budget, t_star in product(config.budgets, config.thresholds):
        cell_rows = [r for r in rows if r.budget == budget and r.t_star == t_star]
        errors = [r.error for r in cell_rows if r.accepted]
        quantiles = _quantiles(errors)
        cells.append(
            SweepCellSummary(
                budget=budget,
                t_star=t_star,
                trials=len(cell_rows),
                accepted=len(errors),
                acceptance_rate=len(errors) / len(cell_rows) if cell_rows else 0.0,
                median_error=None if quantiles is None else quantiles.q50,
                error_quantiles=quantiles,
            )
        )

    accepted = [r for r in rows if r.accepted]
    ratios = [
        r.error / math.sqrt(flip_count(r.budget, config.n) / config.n)
        for r in accepted
        if flip_count(r.budget, config.n) > 0
    ]
    return SweepSummary(
        config=config,
        rows=len(rows),
        acceptance_rate=len(accepted) / len(rows) if rows else 0.0,
        error_quantiles=_quantiles([r.error for r in accepted]),
        fitted_constant=float(np.median(ratios)) if ratios else None,
        cells=cells,
        total_seconds=sum(r.seconds for r in rows),
    )


def output_paths(out: Optional[str]) -> tuple[str, str]:
    stem = out or DEFAULT_STEM
    for suffix in (".csv", ".json"):
        if stem.endswith(suffix):
            stem = stem[: -len(suffix)]
    return f"{stem}.csv", f"{stem}.json"


def run(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    workers = worker_count()
    csv_path, json_path = output_paths(config.out)
    directory = os.path.dirname(csv_path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    rows = run_grid(config, workers)
    write_csv(rows, csv_path, config.record_seconds)
    summary = summarize(config, rows)
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(summary.model_dump(mode="json"), fh, indent=2, sort_keys=True)
        fh.write("\n")

    for cell in summary.cells:
        median = "-" if cell.median_error is None else f"{cell.median_error:.4f}"
        print(f"budget={cell.budget:g} t*={cell.t_star:g}: accepted {cell.accepted}/{cell.trials}, median error {median}")
    if summary.fitted_constant is not None:
        print(f"fitted constant c = {summary.fitted_constant:.3f}")
    print(f"wrote {csv_path} and {json_path} ({summary.rows} rows, {summary.total_seconds:.1f}s)")
    return EXIT_OK
