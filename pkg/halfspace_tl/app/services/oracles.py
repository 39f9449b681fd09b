"""Ground-truth-aware checks: exact Gaussian quantities the learner never sees.

Used by the selftest suite, the test suite and the calibration script.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

from ..schemas.halfspace import Halfspace, LabeledDataset
from ..schemas.learning import RejectionParams
from .core import gaussian_pdf, gaussian_tail, normalize
from .localization import apply_sqrt_sigma, reject_filter, revert_direction
from .testers import kolmogorov_distance


def chow_norm(t: float) -> float:
    """|E[h(x) x]| for h = sign(v·x + t) under N(0, I)."""
    return 2.0 * gaussian_pdf(t)


def truncated_gaussian_mean(t: float) -> float:
    """E[g | g > t] for g ~ N(0, 1)."""
    return gaussian_pdf(t) / gaussian_tail(t)


def tail_ratio(x: float, b: float) -> float:
    """Upper tail at x + b over upper tail at x, stable far into the tail."""
    return math.exp(float(special.log_ndtr(-(x + b))) - float(special.log_ndtr(-x)))


def _positive_mass(h: Halfspace) -> float:
    if h.is_constant:
        return 1.0 if h.t > 0 else 0.0
    return float(special.ndtr(h.t))


def halfspace_disagreement(h1: Halfspace, h2: Halfspace) -> float:
    """Pr over N(0, I) that h1 and h2 disagree, by quadrature in the plane of the two directions."""
    if h1.is_constant or h2.is_constant:
        if h1.is_constant and h2.is_constant:
            return 0.0 if (h1.t > 0) == (h2.t > 0) else 1.0
        constant, other = (h1, h2) if h1.is_constant else (h2, h1)
        positive = _positive_mass(other)
        return 1.0 - positive if constant.t > 0 else positive

    rho = float(np.clip(h1.v @ h2.v, -1.0, 1.0))
    spread = math.sqrt(max(0.0, 1.0 - rho * rho))
    t1, t2 = h1.t, h2.t
    if spread < 1e-9:
        if rho > 0:
            return abs(float(special.ndtr(-t1) - special.ndtr(-t2)))
        return 1.0 - abs(float(special.ndtr(t2) - special.ndtr(-t1)))

    def h2_negative(z: float) -> float:
        return float(special.ndtr(-(rho * z + t2) / spread))

    below, _ = integrate.quad(lambda z: gaussian_pdf(z) * (1.0 - h2_negative(z)), -np.inf, -t1)
    above, _ = integrate.quad(lambda z: gaussian_pdf(z) * h2_negative(z), -t1, np.inf)
    return below + above


def band_claim_probability(
    v: np.ndarray,
    u: np.ndarray,
    a: float,
    b: float,
    t: float,
    n: int,
    rng: np.random.Generator,
) -> float:
    """Monte Carlo Pr[-b u·x > a v·x + t > 0] for x ~ N(0, I)."""
    x = rng.standard_normal((n, v.shape[0]))
    inner = a * (x @ v) + t
    return float(np.count_nonzero((-b * (x @ u) > inner) & (inner > 0.0))) / n


def orthogonal_axis(direction: np.ndarray) -> np.ndarray:
    """A fixed unit vector orthogonal to direction (Gram-Schmidt on the least aligned axis)."""
    axis = np.zeros_like(direction)
    axis[int(np.argmin(np.abs(direction)))] = 1.0
    return normalize(axis - (axis @ direction) * direction)


class RejectionLaw(NamedTuple):
    acceptance_fraction: float
    ks_along: float
    ks_orthogonal: float
    mean_error: float


def rejection_law(S: LabeledDataset, p: RejectionParams, seed: int) -> RejectionLaw:
    """Compare the survivors of the filter with N(w, Sigma)."""
    result = reject_filter(S, p, seed)
    survivors = result.dataset.x
    along = (survivors @ p.direction - p.offset) / p.sigma
    across = survivors @ orthogonal_axis(p.direction)
    return RejectionLaw(
        acceptance_fraction=result.acceptance_fraction,
        ks_along=kolmogorov_distance(along),
        ks_orthogonal=kolmogorov_distance(across),
        mean_error=float(np.linalg.norm(survivors.mean(axis=0) - p.center)),
    )


class ReversionInstance(NamedTuple):
    sigma: float
    beta: float
    delta: float
    error: float


def reversion_instance(
    rng: np.random.Generator,
    d: int = 5,
    max_delta: float = 0.1,
    max_beta: float = 1.0,
    min_sigma: float = 0.2,
) -> ReversionInstance:
    """Random center within beta of v*, learned direction within delta of Sigma^(1/2) v*, reverted."""
    v_star = normalize(rng.standard_normal(d))
    beta = float(rng.uniform(0.0, max_beta))
    while True:
        w = v_star + 0.999 * beta * normalize(rng.standard_normal(d))
        if np.linalg.norm(w) > 1e-6:
            break
    sigma = float(rng.uniform(min_sigma, 0.99))
    params = RejectionParams(direction=normalize(w), offset=float(np.linalg.norm(w)), sigma=sigma)
    delta = float(rng.uniform(0.0, max_delta))
    learned = apply_sqrt_sigma(params, v_star) + 0.999 * delta * normalize(rng.standard_normal(d))
    error = float(np.linalg.norm(revert_direction(learned, params) - v_star))
    return ReversionInstance(sigma=sigma, beta=beta, delta=delta, error=error)
