"""Tester-learner pipeline for general halfspaces.

learn_near_homogeneous
    Chow-vector start, then rounds that squeeze the sample towards the current
    hyperplane (sigma_r = max(2^-r, eps/4)), certify the squeezed frame with the
    wedge test and re-estimate the direction there.
testable_learn
    One trial: center search on the fit part, localize at every candidate,
    learn near-homogeneously, gate with the wedge test on the original sample,
    collect threshold grids plus the two constants, select on the held-out part.
boosted_learn
    ceil(10 log(1/tau)) trials; reject on a rejecting majority, otherwise select
    among the trial winners on a fresh selection sample.
"""
from __future__ import annotations

import logging
import math
from typing import Optional, Protocol, Sequence

import numpy as np

from ..schemas.halfspace import Halfspace, LabeledDataset, LearnConfig, MarginalKind, NoiseProfile
from ..schemas.learning import (
    CandidateSource,
    CenterCandidate,
    IterationState,
    LearnOutcome,
    NearHomogeneousResult,
    RejectionParams,
)
from ..schemas.testing import Diagnostic, TesterVerdict, TestName, TestTolerances
from . import testers
from .center_finder import find_centers
from .core import DEGENERATE_NORM, chow_vector, derive_rng, derive_seed, normalize, threshold_errors
from .localization import (
    InsufficientLocalizedMassError,
    expected_acceptance,
    from_center,
    localized_distance,
    reject_filter,
    revert_direction,
    squeeze,
    to_isotropic_dataset,
)
from .synth import generate, split

logger = logging.getLogger(__name__)

MIN_CHOW_NORM = 0.05


def learn_near_homogeneous(
    S: LabeledDataset,
    epsilon: float,
    seed: int,
    tolerances: Optional[TestTolerances] = None,
    min_round_samples: int = 10_000,
    min_survivors: int = 100,
) -> NearHomogeneousResult:
    tol = tolerances or TestTolerances(epsilon=epsilon)
    verdict = testers.test_covariance(S, 2.0)
    if not verdict:
        return NearHomogeneousResult(verdict=verdict.at("near-homogeneous covariance check"))
    verdict = testers.test_moments(S, tol.k, tol.moment_tol)
    if not verdict:
        return NearHomogeneousResult(verdict=verdict.at("near-homogeneous moment check"))

    chow = chow_vector(S)
    chow_norm = float(np.linalg.norm(chow))
    if chow_norm < MIN_CHOW_NORM:
        return NearHomogeneousResult(
            verdict=TesterVerdict.reject(
                TestName.CHOW_SIGNAL,
                chow_norm,
                MIN_CHOW_NORM,
                f"Chow vector norm = {chow_norm:.4f} < {MIN_CHOW_NORM:g}",
                stage="near-homogeneous start",
            )
        )
    v = chow / chow_norm

    rounds: list[IterationState] = []
    wedge = None
    for r in range(1, math.ceil(math.log2(1.0 / epsilon)) + 1):
        sigma = max(2.0**-r, epsilon / 4.0)
        if sigma * S.n < min_round_samples:
            logger.debug("round %d: sigma=%.4f leaves too few samples of %d, stopping", r, sigma, S.n)
            break
        params = squeeze(v, sigma)
        try:
            filtered = reject_filter(S, params, derive_seed(seed, "inner_round", r), min_survivors)
        except InsufficientLocalizedMassError as e:
            return NearHomogeneousResult(
                verdict=TesterVerdict.reject(
                    TestName.LOCALIZED_MASS, e.survivors, e.required, str(e), stage=f"round {r}"
                ),
                direction=v,
                rounds=rounds,
            )
        local = to_isotropic_dataset(params, filtered.dataset)
        measured = testers.wedge_statistics(local, v, tol.eta)
        verdict = testers.wedge_verdict(measured, tol.eta)
        if not verdict:
            return NearHomogeneousResult(verdict=verdict.at(f"round {r} wedge"), direction=v, rounds=rounds)
        wedge = measured

        local_chow = chow_vector(local)
        noise_floor = 4.0 * math.sqrt(local.d / local.n)
        if float(np.linalg.norm(local_chow)) < noise_floor:
            logger.debug("round %d: localized Chow vector below %.4f, stopping", r, noise_floor)
            break
        v = revert_direction(local_chow, params)
        rounds.append(IterationState(current_direction=v, round=r, sigma_schedule_value=sigma, survivors=local.n))
        logger.debug("round %d: sigma=%.4f survivors=%d", r, sigma, local.n)
    return NearHomogeneousResult(verdict=TesterVerdict.accept(), direction=v, rounds=rounds, wedge=wedge)


def threshold_grid(epsilon: float) -> np.ndarray:
    m = math.ceil(math.log(1.0 / epsilon) / epsilon)
    return np.arange(-m, m + 1) * epsilon


def build_hypotheses(v, p: Optional[RejectionParams], epsilon: float) -> list[Halfspace]:
    """Threshold grid on the direction reverted to the original frame (identity frame if p is None)."""
    direction = normalize(v) if p is None else revert_direction(v, p)
    return [Halfspace(v=direction, t=float(t)) for t in threshold_grid(epsilon)]


def constant_hypotheses(d: int) -> list[Halfspace]:
    return [Halfspace.constant(1, d), Halfspace.constant(-1, d)]


def selection_errors(hypotheses: Sequence[Halfspace], S: LabeledDataset) -> np.ndarray:
    """Empirical errors on S, one sort per run of hypotheses sharing a direction."""
    errors = np.empty(len(hypotheses))
    start = 0
    while start < len(hypotheses):
        stop = start + 1
        while stop < len(hypotheses) and np.array_equal(hypotheses[stop].v, hypotheses[start].v):
            stop += 1
        block = hypotheses[start:stop]
        errors[start:stop] = threshold_errors(block[0].v, [h.t for h in block], S)
        start = stop
    return errors


def select_hypothesis(hypotheses: Sequence[Halfspace], S: LabeledDataset) -> tuple[int, float]:
    """argmin of the error on S; ties go to the smallest |t|, then the earliest index."""
    if not hypotheses:
        raise ValueError("no hypotheses to select from")
    errors = selection_errors(hypotheses, S)
    best = float(errors.min())
    tied = np.flatnonzero(errors == best)
    index = min(tied, key=lambda i: (abs(hypotheses[i].t), i))
    return int(index), best


def _prefixed(diagnostic: Diagnostic, stage: str) -> Diagnostic:
    return diagnostic.at(f"{stage}: {diagnostic.stage}" if diagnostic.stage else stage)


def _skip(diagnostics: list[Diagnostic], verdict: TesterVerdict, stage: str) -> None:
    diagnostics.append(_prefixed(verdict.diagnostic, stage))
    logger.debug("skip %s: %s", stage, verdict.diagnostic.message)


def _candidate_stage(index: int, candidate: CenterCandidate) -> str:
    return f"candidate {index} ({candidate.source.value} #{candidate.grid_index}, |c|={candidate.norm:.3f})"


def distinct_centers(candidates: Sequence[CenterCandidate], resolution: float) -> list[bool]:
    """Keep mask: a candidate is dropped when its localized Gaussian lies within
    `resolution` total variation of the last kept candidate from the same ray."""
    keep: list[bool] = []
    last: dict[CandidateSource, RejectionParams] = {}
    for candidate in candidates:
        if candidate.norm < DEGENERATE_NORM:
            keep.append(True)
            continue
        params = from_center(candidate.point)
        previous = last.get(candidate.source)
        if previous is not None and localized_distance(previous, params) < resolution:
            keep.append(False)
            continue
        last[candidate.source] = params
        keep.append(True)
    return keep


def testable_learn(
    S: LabeledDataset,
    config: LearnConfig,
    tolerances: Optional[TestTolerances] = None,
) -> LearnOutcome:
    eps = config.epsilon
    tol = tolerances or TestTolerances(epsilon=eps)
    fit, select = split(S, [1.0 - config.select_fraction, config.select_fraction], derive_seed(config.seed, "fit_select"))

    search = find_centers(fit, eps, tol)
    if not search.verdict:
        logger.info("center search rejected: %s", search.verdict.diagnostic)
        return LearnOutcome(verdict=search.verdict, diagnostics=[search.verdict.diagnostic])

    wedge_part = fit.subset(slice(0, config.wedge_samples))
    diagnostics: list[Diagnostic] = []
    notes: list[str] = []
    hypotheses: list[Halfspace] = []
    origin_done = False
    resolution = eps / 2.0 if config.center_resolution is None else config.center_resolution
    keep = distinct_centers(search.candidates, resolution)

    for index, candidate in enumerate(search.candidates):
        if not keep[index]:
            continue
        stage = _candidate_stage(index, candidate)
        if candidate.norm < DEGENERATE_NORM:
            if origin_done:
                continue
            origin_done = True
            params, local = None, fit
        else:
            params = from_center(candidate.point)
            predicted = expected_acceptance(params) * fit.n
            if predicted < config.min_survivors / 2.0:
                _skip(
                    diagnostics,
                    TesterVerdict.reject(
                        TestName.LOCALIZED_MASS,
                        predicted,
                        config.min_survivors,
                        f"insufficient localized mass: about {predicted:.1f} survivors expected",
                    ),
                    stage,
                )
                continue
            try:
                filtered = reject_filter(fit, params, derive_seed(config.seed, "center", index), config.min_survivors)
            except InsufficientLocalizedMassError as e:
                _skip(diagnostics, TesterVerdict.reject(TestName.LOCALIZED_MASS, e.survivors, e.required, str(e)), stage)
                continue
            local = to_isotropic_dataset(params, filtered.dataset)

        inner = learn_near_homogeneous(
            local,
            eps,
            derive_seed(config.seed, "inner", index),
            tol,
            config.min_round_samples,
            config.min_survivors,
        )
        if not inner.verdict:
            _skip(diagnostics, inner.verdict, stage)
            continue

        reverted = inner.direction if params is None else revert_direction(inner.direction, params)
        gate = testers.wedge_bound_test(wedge_part, reverted, tol.eta)
        if not gate:
            verdict = gate.at(f"{stage} wedge on original sample")
            logger.info("run rejected: %s", verdict.diagnostic)
            return LearnOutcome(verdict=verdict, diagnostics=[*diagnostics, verdict.diagnostic], notes=notes)
        if inner.wedge is None:
            notes.append(f"{stage}: no localized rounds")
        else:
            notes.append(
                f"{stage}: {len(inner.rounds)} rounds, localized wedge mass deviation "
                f"{inner.wedge.mass_deviation:.4f}, worst band spectral {inner.wedge.worst_band_spectral:.2f}"
            )
        hypotheses.extend(build_hypotheses(inner.direction, params, eps))

    if not hypotheses and not search.imbalanced:
        verdict = TesterVerdict.reject(
            TestName.NO_VIABLE_CENTER,
            len(search.candidates),
            1,
            "no viable localization center",
        )
        logger.info("run rejected: %s", verdict.diagnostic)
        return LearnOutcome(verdict=verdict, diagnostics=[*diagnostics, verdict.diagnostic], notes=notes)

    thinned = keep.count(False)
    if thinned:
        notes.append(f"{thinned} candidates within total variation {resolution:g} of a kept neighbour skipped")
    hypotheses.extend(constant_hypotheses(S.d))
    index, error = select_hypothesis(hypotheses, select)
    chosen = hypotheses[index]
    logger.info(
        "run accepted: %d candidates, %d thinned, %d hypotheses, chosen %s with selection error %.4f",
        len(search.candidates),
        thinned,
        len(hypotheses),
        chosen.describe(),
        error,
    )
    return LearnOutcome(
        verdict=TesterVerdict.accept(),
        chosen=chosen,
        test_error=error,
        hypotheses_considered=len(hypotheses),
        diagnostics=diagnostics,
        notes=notes,
    )


class DatasetSource(Protocol):
    def draw(self, role: str, index: int, size: Optional[int] = None) -> LabeledDataset:
        ...


class SyntheticSource:
    """Fresh samples from the generator for every draw."""

    def __init__(
        self,
        d: int,
        n: int,
        marginal: MarginalKind,
        truth: Halfspace,
        noise: NoiseProfile,
        seed: int,
    ):
        self.d = d
        self.n = n
        self.marginal = marginal
        self.truth = truth
        self.noise = noise
        self.seed = seed

    def draw(self, role: str, index: int, size: Optional[int] = None) -> LabeledDataset:
        return generate(
            self.d,
            size or self.n,
            self.marginal,
            self.truth,
            self.noise,
            derive_seed(self.seed, f"source:{role}", index),
        )


class PooledSourceError(ValueError):
    pass


class PooledSource:
    """A fixed sample cut into one selection chunk and `trials` disjoint trial chunks."""

    def __init__(self, S: LabeledDataset, trials: int, selection_size: int, seed: int):
        if trials < 1:
            raise PooledSourceError(f"need at least one trial, got {trials}")
        order = derive_rng(seed, "pool").permutation(S.n)
        select_n = min(selection_size, S.n // 5)
        chunks = np.array_split(order[select_n:], trials)
        if select_n < 1 or any(chunk.size < 2 for chunk in chunks):
            raise PooledSourceError(f"{S.n} points are too few for {trials} trials plus a selection set")
        self._selection = S.subset(np.sort(order[:select_n]))
        self._trials = [S.subset(np.sort(chunk)) for chunk in chunks]
        if select_n < selection_size:
            logger.warning("selection set capped at %d of the requested %d points", select_n, selection_size)

    def draw(self, role: str, index: int, size: Optional[int] = None) -> LabeledDataset:
        if role == "selection":
            return self._selection
        return self._trials[index]


def trial_count(tau: float, max_trials: int = 200) -> int:
    trials = max(1, math.ceil(10.0 * math.log(1.0 / tau)))
    if trials > max_trials:
        logger.warning("tau=%g asks for %d trials, capped at %d", tau, trials, max_trials)
        return max_trials
    return trials


def selection_size(config: LearnConfig, d: int) -> int:
    if config.selection_size is not None:
        return config.selection_size
    return math.ceil(20.0 * d * math.log(math.log(1.0 / config.tau) + math.e) / config.epsilon**2)


def boosted_learn(
    source: DatasetSource,
    config: LearnConfig,
    tolerances: Optional[TestTolerances] = None,
) -> LearnOutcome:
    trials = trial_count(config.tau, config.max_trials)
    diagnostics: list[Diagnostic] = []
    notes: list[str] = []
    pool: list[Halfspace] = []
    rejected = 0

    for trial in range(trials):
        S = source.draw("trial", trial)
        trial_config = config.model_copy(update={"seed": derive_seed(config.seed, "trial", trial)})
        outcome = testable_learn(S, trial_config, tolerances)
        diagnostics.extend(_prefixed(diag, f"trial {trial}") for diag in outcome.diagnostics)
        if outcome.accepted:
            pool.append(outcome.chosen)
            notes.append(f"trial {trial}: accepted {outcome.chosen.describe()} (selection error {outcome.test_error:.4f})")
        else:
            rejected += 1
            notes.append(f"trial {trial}: rejected by {outcome.verdict.diagnostic}")
        logger.info("trial %d/%d: %s", trial + 1, trials, "accept" if outcome.accepted else "reject")

    if rejected > trials / 2.0:
        verdict = TesterVerdict.reject(
            TestName.BOOSTING_MAJORITY,
            rejected,
            trials / 2.0,
            f"{rejected} of {trials} trials rejected",
        )
        return LearnOutcome(
            verdict=verdict,
            diagnostics=[*diagnostics, verdict.diagnostic],
            notes=notes,
            trials_run=trials,
            trials_rejected=rejected,
        )

    selection = source.draw("selection", 0, selection_size(config, pool[0].d))
    index, error = select_hypothesis(pool, selection)
    logger.info("boosted: %d/%d trials accepted, chosen %s", trials - rejected, trials, pool[index].describe())
    return LearnOutcome(
        verdict=TesterVerdict.accept(),
        chosen=pool[index],
        test_error=error,
        hypotheses_considered=len(pool),
        diagnostics=diagnostics,
        notes=notes,
        trials_run=trials,
        trials_rejected=rejected,
    )


testable_learn.__test__ = False  # not a pytest test when imported into one
