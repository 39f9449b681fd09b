"""Synthetic labeled samples: marginal draw, ground-truth labels, then label corruption.

The adversary acts on the realized sample, so the empirical error of the truth
halfspace on the output is exactly the number of flips divided by n.

Adversaries:
    boundary  flips the points with the smallest |v*·x + t*|
    tail      flips minority-clean-label points with the largest |v*·x + t*|
    random    flips a uniformly random subset
"""
from __future__ import annotations

import logging
import math
from typing import Sequence

import numpy as np

from ..schemas.halfspace import (
    CorruptionReport,
    Halfspace,
    LabeledDataset,
    MarginalFamily,
    MarginalKind,
    NoiseProfile,
    NoiseStrategy,
)
from .core import DimensionMismatchError, derive_rng, predict

logger = logging.getLogger(__name__)


class NoiseBudgetError(ValueError):
    pass


class SplitError(ValueError):
    pass


def flip_count(budget: float, n: int) -> int:
    return int(math.floor(budget * n + 1e-9))


def sample_marginal(marginal: MarginalKind, n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    family = marginal.family
    if family is MarginalFamily.STANDARD_GAUSSIAN:
        return rng.standard_normal((n, d))
    if family is MarginalFamily.SCALED_GAUSSIAN:
        return marginal.parameter * rng.standard_normal((n, d))
    if family is MarginalFamily.TWO_POINT_MIXTURE:
        x = rng.standard_normal((n, d))
        signs = 2 * rng.integers(0, 2, size=n) - 1
        x[:, 0] = marginal.parameter * signs
        return x
    if family is MarginalFamily.UNIFORM_CUBE:
        h = marginal.parameter
        return rng.uniform(-h, h, size=(n, d))
    raise ValueError(f"unsupported marginal {family!r}")


def minority_label(clean: np.ndarray) -> int:
    positives = int(np.count_nonzero(clean == 1))
    return 1 if positives <= clean.shape[0] - positives else -1


def choose_flips(
    clean: np.ndarray,
    margins: np.ndarray,
    noise: NoiseProfile,
    rng: np.random.Generator,
) -> tuple[np.ndarray, int]:
    """Indices to flip and the minority clean label (reported for every strategy)."""
    n = clean.shape[0]
    k = flip_count(noise.budget, n)
    minority = minority_label(clean)
    if k == 0:
        return np.empty(0, dtype=np.intp), minority
    if noise.strategy is NoiseStrategy.BOUNDARY_FLIP:
        return np.argsort(np.abs(margins), kind="stable")[:k], minority
    if noise.strategy is NoiseStrategy.TAIL_FLIP:
        pool = np.flatnonzero(clean == minority)
        order = np.argsort(-np.abs(margins[pool]), kind="stable")
        return pool[order[:k]], minority
    return rng.choice(n, size=k, replace=False), minority


def generate_with_report(
    d: int,
    n: int,
    marginal: MarginalKind,
    truth: Halfspace,
    noise: NoiseProfile,
    seed: int,
) -> tuple[LabeledDataset, CorruptionReport]:
    if n < 1:
        raise ValueError(f"need at least one point, got n={n}")
    if d < 2:
        raise ValueError(f"need dimension at least 2, got d={d}")
    if truth.d != d:
        raise DimensionMismatchError(f"truth has dimension {truth.d}, requested d={d}")
    if noise.budget >= 0.5:
        raise NoiseBudgetError(f"noise budget must be below 1/2, got {noise.budget}")

    x = sample_marginal(marginal, n, d, derive_rng(seed, "marginal"))
    clean = predict(truth, x)
    margins = np.zeros(n) if truth.is_constant else x @ truth.v + truth.t
    flips, minority = choose_flips(clean, margins, noise, derive_rng(seed, "noise"))

    y = clean.copy()
    y[flips] = -y[flips]
    report = CorruptionReport(
        requested_flips=flip_count(noise.budget, n),
        realized_flips=int(flips.shape[0]),
        minority_label=minority,
        strategy=noise.strategy,
    )
    if report.shortfall:
        logger.warning(
            "tail adversary ran out of minority points: requested %d flips, realized %d",
            report.requested_flips,
            report.realized_flips,
        )
    logger.debug("generated n=%d d=%d marginal=%s flips=%d", n, d, marginal.label(), report.realized_flips)
    return LabeledDataset(x=x, y=y), report


def generate(
    d: int,
    n: int,
    marginal: MarginalKind,
    truth: Halfspace,
    noise: NoiseProfile,
    seed: int,
) -> LabeledDataset:
    dataset, _ = generate_with_report(d, n, marginal, truth, noise, seed)
    return dataset


def split(S: LabeledDataset, fractions: Sequence[float], seed: int) -> list[LabeledDataset]:
    """Disjoint random partition; each part keeps the original point order."""
    weights = np.asarray(fractions, dtype=np.float64)
    if weights.ndim != 1 or weights.size == 0:
        raise SplitError("need at least one fraction")
    if np.any(weights <= 0):
        raise SplitError(f"fractions must be positive, got {list(fractions)}")
    if abs(float(weights.sum()) - 1.0) > 1e-9:
        raise SplitError(f"fractions must sum to 1, got {float(weights.sum())!r}")
    if weights.size > S.n:
        raise SplitError(f"cannot split {S.n} points into {weights.size} parts")

    perm = derive_rng(seed, "split").permutation(S.n)
    bounds = np.round(np.cumsum(weights) * S.n).astype(int)
    bounds[-1] = S.n
    parts = np.split(perm, bounds[:-1])
    if any(part.size == 0 for part in parts):
        logger.warning("split of %d points produced an empty part (fractions %s)", S.n, list(fractions))
    return [S.subset(np.sort(part)) for part in parts]
