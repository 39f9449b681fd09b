"""(w, sigma)-rejection sampling and the covariance-shaping transform.

Sigma = I - (1 - sigma^2) ŵŵ^T is applied in closed form as the rank-one update
Sigma^{±1/2} = I + (sigma^{±1} - 1) ŵŵ^T. Filtering N(0, I) with
accept_probability leaves N(w, Sigma); to_isotropic maps that back to N(0, I).
"""
from __future__ import annotations

import logging
import math

import numpy as np

from ..schemas.halfspace import Halfspace, LabeledDataset
from ..schemas.learning import FilterResult, RejectionParams, ReversionBound
from .core import DEGENERATE_NORM, DegenerateVectorError, DimensionMismatchError, derive_rng, normalize

logger = logging.getLogger(__name__)

MAX_SIGMA = math.sqrt(0.5)
REVERSION_CONSTANT = 8.0


class InvalidScaleError(ValueError):
    pass


class InsufficientLocalizedMassError(RuntimeError):
    def __init__(self, survivors: int, required: int, acceptance_fraction: float):
        super().__init__(
            f"insufficient localized mass: {survivors} survivors (need {required}), "
            f"acceptance fraction {acceptance_fraction:.4g}"
        )
        self.survivors = survivors
        self.required = required
        self.acceptance_fraction = acceptance_fraction


def _check_scale(sigma: float) -> float:
    if not 0.0 < sigma < 1.0:
        raise InvalidScaleError(f"sigma must lie in (0, 1), got {sigma}")
    return float(sigma)


def sigma_for(w) -> float:
    norm = float(np.linalg.norm(np.asarray(w, dtype=np.float64)))
    if norm < DEGENERATE_NORM:
        raise DegenerateVectorError("localization center must be nonzero")
    return min(1.0 / norm, MAX_SIGMA)


def from_center(w) -> RejectionParams:
    w = np.asarray(w, dtype=np.float64)
    sigma = sigma_for(w)
    return RejectionParams(direction=normalize(w), offset=float(np.linalg.norm(w)), sigma=sigma)


def squeeze(v, sigma: float) -> RejectionParams:
    """Origin-centred params shrinking the variance along v to sigma^2."""
    return RejectionParams(direction=normalize(v), offset=0.0, sigma=_check_scale(sigma))


def accept_probabilities(p: RejectionParams, X: np.ndarray) -> np.ndarray:
    sigma = _check_scale(p.sigma)
    gap = np.asarray(X, dtype=np.float64) @ p.direction - p.peak
    return np.exp(-(sigma**-2 - 1.0) * gap * gap / 2.0)


def accept_probability(p: RejectionParams, x) -> float:
    return float(accept_probabilities(p, np.asarray(x, dtype=np.float64)[None, :])[0])


def expected_acceptance(p: RejectionParams) -> float:
    """Acceptance rate of the filter over N(0, I)."""
    return p.sigma * math.exp(-(p.offset**2) / (2.0 * (1.0 - p.sigma**2)))


def localized_covariance(p: RejectionParams) -> np.ndarray:
    return np.eye(p.d) - (1.0 - p.sigma**2) * np.outer(p.direction, p.direction)


def localized_distance(p: RejectionParams, q: RejectionParams) -> float:
    """Upper bound on the total variation distance between N(w_p, Sigma_p) and N(w_q, Sigma_q).

    Uses the closed-form Bhattacharyya coefficient BC of two Gaussians and
    TV <= sqrt(1 - BC^2).
    """
    if p.d != q.d:
        raise DimensionMismatchError(f"params have dimensions {p.d} and {q.d}")
    cov_p, cov_q = localized_covariance(p), localized_covariance(q)
    pooled = (cov_p + cov_q) / 2.0
    gap = p.center - q.center
    log_coefficient = (
        0.25 * np.linalg.slogdet(cov_p)[1]
        + 0.25 * np.linalg.slogdet(cov_q)[1]
        - 0.5 * np.linalg.slogdet(pooled)[1]
        - float(gap @ np.linalg.solve(pooled, gap)) / 8.0
    )
    coefficient = min(1.0, math.exp(log_coefficient))
    return math.sqrt(1.0 - coefficient**2)


def reject_filter(
    S: LabeledDataset,
    p: RejectionParams,
    seed: int,
    min_survivors: int = 100,
) -> FilterResult:
    """Keep point i iff u_i < accept_probability(x_i), u_i the i-th uniform of the filter stream."""
    if S.d != p.d:
        raise DimensionMismatchError(f"params have dimension {p.d}, dataset has {S.d}")
    uniforms = derive_rng(seed, "reject_filter").random(S.n)
    keep = uniforms < accept_probabilities(p, S.x)
    survivors = int(np.count_nonzero(keep))
    fraction = survivors / S.n if S.n else 0.0
    logger.debug("rejection filter offset=%.3f sigma=%.3f kept %d/%d", p.offset, p.sigma, survivors, S.n)
    if survivors < min_survivors:
        raise InsufficientLocalizedMassError(survivors, min_survivors, fraction)
    return FilterResult(dataset=S.subset(keep), acceptance_fraction=fraction)


def _rank_one(p: RejectionParams, z: np.ndarray, factor: float) -> np.ndarray:
    along = np.expand_dims(np.asarray(z @ p.direction), -1)
    return z + (factor - 1.0) * along * p.direction


def apply_sqrt_sigma(p: RejectionParams, z) -> np.ndarray:
    return _rank_one(p, np.asarray(z, dtype=np.float64), p.sigma)


def apply_inv_sqrt_sigma(p: RejectionParams, z) -> np.ndarray:
    return _rank_one(p, np.asarray(z, dtype=np.float64), 1.0 / p.sigma)


def to_isotropic(p: RejectionParams, x) -> np.ndarray:
    """Sigma^{-1/2}(x - w); accepts one point or an (n, d) array."""
    return apply_inv_sqrt_sigma(p, np.asarray(x, dtype=np.float64) - p.center)


def from_isotropic(p: RejectionParams, z) -> np.ndarray:
    return apply_sqrt_sigma(p, z) + p.center


def to_isotropic_dataset(p: RejectionParams, S: LabeledDataset) -> LabeledDataset:
    return LabeledDataset(x=to_isotropic(p, S.x), y=S.y)


def transformed_halfspace(p: RejectionParams, h: Halfspace) -> Halfspace:
    """The halfspace labelling the isotropic frame exactly as h labels the original one."""
    if h.is_constant:
        return h
    stretched = apply_sqrt_sigma(p, h.v)
    norm = float(np.linalg.norm(stretched))
    if norm < DEGENERATE_NORM:
        raise DegenerateVectorError(f"Sigma^(1/2) v has norm {norm:.3e}")
    return Halfspace(v=stretched / norm, t=(float(h.v @ p.center) + h.t) / norm)


def revert_direction(v, p: RejectionParams) -> np.ndarray:
    return normalize(apply_inv_sqrt_sigma(p, normalize(v)))


def reversion_error_bound(b: ReversionBound) -> float:
    if b.beta >= math.sqrt(2.0):
        raise InvalidScaleError(f"beta must be below sqrt(2), got {b.beta}")
    magnification = b.beta / (b.sigma * (1.0 - b.beta**2 / 2.0)) + 1.0
    return REVERSION_CONSTANT * b.delta * (b.sigma + b.beta) * magnification
