"""Candidate localization centers.

find_centers certifies the sample (covariance, mean, then directional CDF and
trimmed-mean stability along each tail mean) and lays a grid of spacing eps^2
along each tail-mean ray. chow_center_search adds a grid along the Chow vector
after a low-degree moment check, pointed towards the minority label. The
candidate list order is fixed: tail mean of +1, tail mean of -1, Chow path.
"""
from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np

from ..schemas.halfspace import Halfspace, LabeledDataset
from ..schemas.learning import CandidateSource, CenterCandidate, CenterSearchResult, TailStats
from ..schemas.testing import TesterVerdict, TestName, TestTolerances
from .core import chow_vector, gaussian_tail, require_nonempty
from . import testers

logger = logging.getLogger(__name__)

CHOW_GRID_REACH = 10.0
CHOW_NOISE_MULTIPLE = 3.0


class EmptyTailError(RuntimeError):
    pass


def minority_mass(S: LabeledDataset) -> float:
    return min(S.label_mass(1), S.label_mass(-1))


def minority_label(S: LabeledDataset) -> int:
    return 1 if S.label_mass(1) <= S.label_mass(-1) else -1


def tail_mean(S: LabeledDataset, label: int) -> TailStats:
    mask = S.y == label
    count = int(np.count_nonzero(mask))
    if count == 0:
        raise EmptyTailError(f"no points carry label {label:+d}")
    return TailStats(
        minority_mass=minority_mass(S),
        tail_mean=S.x[mask].mean(axis=0),
        tail_label=label,
        count=count,
    )


def chow_floor(S: LabeledDataset, epsilon: float) -> float:
    """Chow norm below which no direction is read off: epsilon, or the sampling noise
    level 3 sqrt(d/n) when that is smaller (far thresholds carry a faint but real signal)."""
    return min(epsilon, CHOW_NOISE_MULTIPLE * math.sqrt(S.d / S.n))


def ray(direction: np.ndarray, spacing: float, last_index: int, source: CandidateSource) -> list[CenterCandidate]:
    return [CenterCandidate(point=i * spacing * direction, source=source, grid_index=i) for i in range(last_index + 1)]


def origin_candidate(d: int, source: CandidateSource) -> CenterCandidate:
    return CenterCandidate(point=np.zeros(d), source=source, grid_index=0)


def ray_cap(minority: float, epsilon: float) -> int:
    return math.ceil((2.0 * math.log(1.0 / minority) + 2.0) / epsilon**2) + 1


def tail_ray(S: LabeledDataset, tail: TailStats, epsilon: float) -> tuple[TesterVerdict, list[CenterCandidate]]:
    source = CandidateSource.TAIL_MEAN_PLUS if tail.tail_label > 0 else CandidateSource.TAIL_MEAN_MINUS
    stage = f"tail mean {tail.tail_label:+d}"
    norm = float(np.linalg.norm(tail.tail_mean))
    if norm < epsilon**2:
        logger.debug("%s: mean norm %.2e below eps^2, origin only", stage, norm)
        return TesterVerdict.accept(), [origin_candidate(S.d, source)]

    direction = tail.tail_mean / norm
    projections = S.x @ direction
    verdict = testers.ks_test(projections, epsilon)
    if not verdict:
        return verdict.at(f"{stage} CDF check"), []
    verdict = testers.test_trimmed_stability(projections, epsilon)
    if not verdict:
        return verdict.at(f"{stage} trimmed mean check"), []

    reach = norm + 1.0 / math.sqrt(math.log(1.0 / tail.minority_mass))
    last_index = math.ceil(reach / epsilon**2)
    cap = ray_cap(tail.minority_mass, epsilon)
    if last_index + 1 > cap:
        return (
            TesterVerdict.reject(
                TestName.LIST_SIZE,
                last_index + 1,
                cap,
                f"tail grid needs {last_index + 1} points > cap {cap}",
                stage=stage,
            ),
            [],
        )
    logger.debug("%s: |mu|=%.3f, %d grid points", stage, norm, last_index + 1)
    return TesterVerdict.accept(), ray(direction, epsilon**2, last_index, source)


def chow_center_search(
    S: LabeledDataset,
    epsilon: float,
    tolerances: Optional[TestTolerances] = None,
) -> CenterSearchResult:
    require_nonempty(S)
    tol = tolerances or TestTolerances(epsilon=epsilon)
    verdict = testers.test_moments(S, tol.k, tol.moment_tol)
    if not verdict:
        return CenterSearchResult.rejected(verdict.at("chow path moment check"))

    chow = chow_vector(S)
    norm = float(np.linalg.norm(chow))
    floor = chow_floor(S, epsilon)
    if norm < floor:
        logger.debug("chow vector norm %.4f below %.4f, origin only", norm, floor)
        return CenterSearchResult(verdict=verdict, candidates=[origin_candidate(S.d, CandidateSource.CHOW_PATH)])
    # E[yx] points along the +1 side; the boundary lies towards the minority label
    toward = minority_label(S) * chow / norm
    last_index = math.ceil(CHOW_GRID_REACH / epsilon**2)
    return CenterSearchResult(
        verdict=verdict,
        candidates=ray(toward, epsilon**2, last_index, CandidateSource.CHOW_PATH),
    )


def find_centers(
    S: LabeledDataset,
    epsilon: float,
    tolerances: Optional[TestTolerances] = None,
) -> CenterSearchResult:
    require_nonempty(S)
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    tol = tolerances or TestTolerances(epsilon=epsilon)

    minority = minority_mass(S)
    if minority < epsilon / 2.0:
        logger.info("minority label mass %.4f below eps/2: Chow path only", minority)
        chow = chow_center_search(S, epsilon, tol)
        return CenterSearchResult(verdict=chow.verdict, candidates=chow.candidates, imbalanced=True)

    verdict = testers.test_covariance(S, 2.0)
    if not verdict:
        return CenterSearchResult.rejected(verdict.at("covariance check"))
    verdict = testers.test_mean(S, epsilon)
    if not verdict:
        return CenterSearchResult.rejected(verdict.at("mean check"))

    candidates: list[CenterCandidate] = []
    tails: list[TailStats] = []
    for label in (1, -1):
        tail = tail_mean(S, label)
        tails.append(tail)
        verdict, found = tail_ray(S, tail, epsilon)
        if not verdict:
            return CenterSearchResult.rejected(verdict)
        candidates.extend(found)

    chow = chow_center_search(S, epsilon, tol)
    if not chow.verdict:
        return chow
    candidates.extend(chow.candidates)
    logger.info("center search: %d candidates (minority mass %.4f)", len(candidates), minority)
    return CenterSearchResult(verdict=TesterVerdict.accept(), candidates=candidates, tails=tails)


def center_quality(c: CenterCandidate, truth: Halfspace) -> tuple[float, float]:
    """(distance of c to the truth's hyperplane, upper Gaussian tail at |c|)."""
    alpha = abs(float(truth.v @ c.point) + truth.t)
    beta = float(gaussian_tail(c.norm))
    return alpha, beta
