"""Certifying distribution tests. Each returns a TesterVerdict; none raises on a failed check.

Tests:
    test_covariance         spectral norm of the empirical second moment <= bound
    test_mean               norm of the empirical mean < epsilon
    ks_test                 Kolmogorov distance of a 1-d sample to N(0, 1) <= epsilon
    test_trimmed_stability  mean shift after dropping the floor(eps*n) extreme values
    test_moments            all monomial moments of degree <= k close to Gaussian
    wedge_bound_test        band masses along v and per-band orthogonal covariance
"""
from __future__ import annotations

import logging
import math
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Optional

import numpy as np
from scipy import special, stats

from ..schemas.halfspace import LabeledDataset
from ..schemas.testing import TesterVerdict, TestName, WedgeStatistics
from .core import normalize, require_nonempty, second_moment, spectral_upper

logger = logging.getLogger(__name__)

C_STAB = 4.0
MAX_MONOMIALS = 1_000_000
MOMENT_BLOCK_ENTRIES = 1 << 23
WEDGE_SPECTRAL_BOUND = 2.0


class TesterConfigError(ValueError):
    pass


def test_covariance(S: LabeledDataset, bound: float = 2.0) -> TesterVerdict:
    require_nonempty(S)
    norm = spectral_upper(second_moment(S.x))
    logger.debug("covariance spectral norm %.4f (bound %g)", norm, bound)
    if norm <= bound:
        return TesterVerdict.accept()
    return TesterVerdict.reject(TestName.COVARIANCE, norm, bound, f"covariance spectral norm = {norm:.2f} > {bound:g}")


def test_mean(S: LabeledDataset, epsilon: float) -> TesterVerdict:
    require_nonempty(S)
    norm = float(np.linalg.norm(S.x.mean(axis=0)))
    logger.debug("mean norm %.4f (epsilon %g)", norm, epsilon)
    if norm < epsilon:
        return TesterVerdict.accept()
    return TesterVerdict.reject(TestName.MEAN, norm, epsilon, f"mean norm = {norm:.4f} >= {epsilon:g}")


def kolmogorov_distance(values) -> float:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("Kolmogorov distance of an empty sample")
    return float(stats.kstest(values, "norm", method="asymp").statistic)


def ks_test(values, epsilon: float) -> TesterVerdict:
    distance = kolmogorov_distance(values)
    logger.debug("Kolmogorov distance %.4f (epsilon %g)", distance, epsilon)
    if distance <= epsilon:
        return TesterVerdict.accept()
    return TesterVerdict.reject(TestName.KOLMOGOROV, distance, epsilon, f"Kolmogorov distance = {distance:.4f} > {epsilon:g}")


def stability_bound(epsilon: float) -> float:
    return C_STAB * epsilon * math.sqrt(math.log(1.0 / epsilon))


def trimmed_shift(values, epsilon: float) -> float:
    """Larger mean shift of the two extremal removals (top m, bottom m), m = floor(eps*n)."""
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    m = int(math.floor(epsilon * ordered.size))
    if m == 0 or m >= ordered.size:
        return 0.0
    full = ordered.mean()
    return float(max(abs(ordered[:-m].mean() - full), abs(ordered[m:].mean() - full)))


def test_trimmed_stability(values, epsilon: float) -> TesterVerdict:
    if np.asarray(values).size == 0:
        raise ValueError("trimmed stability of an empty sample")
    if not 0.0 < epsilon < 0.5:
        raise TesterConfigError(f"trimmed stability needs 0 < epsilon < 1/2, got {epsilon}")
    shift = trimmed_shift(values, epsilon)
    bound = stability_bound(epsilon)
    logger.debug("trimmed mean shift %.4f (bound %.4f)", shift, bound)
    if shift <= bound:
        return TesterVerdict.accept()
    return TesterVerdict.reject(
        TestName.TRIMMED_STABILITY, shift, bound, f"trimmed mean shift = {shift:.4f} > {bound:.4f}"
    )


def gaussian_moment(power: int) -> float:
    """E[g^p] for g ~ N(0, 1): (p-1)!! for even p, 0 for odd p."""
    if power == 0:
        return 1.0
    if power % 2:
        return 0.0
    return float(special.factorial2(power - 1, exact=True))


def monomial_count(d: int, k: int) -> int:
    return math.comb(d + k, k) - 1


@lru_cache(maxsize=64)
def monomials(d: int, k: int) -> tuple[tuple[int, ...], ...]:
    """Every multi-index of total degree 1..k, as sorted tuples of axes."""
    return tuple(
        combo for degree in range(1, k + 1) for combo in combinations_with_replacement(range(d), degree)
    )


def reference_moment(combo: tuple[int, ...]) -> float:
    powers = np.bincount(np.asarray(combo), minlength=1)
    return math.prod(gaussian_moment(int(p)) for p in powers)


@lru_cache(maxsize=64)
def reference_moments(d: int, k: int) -> np.ndarray:
    moments = np.array([reference_moment(combo) for combo in monomials(d, k)])
    moments.setflags(write=False)
    return moments


def _feature_blocks(X: np.ndarray, half: int, index: list[dict]) -> list[np.ndarray]:
    """Column j-block holds every exact-degree-j monomial of the rows of X, in index order."""
    blocks = [np.ones((X.shape[0], 1))]
    for j in range(1, half + 1):
        prev, prev_index = blocks[-1], index[j - 1]
        blocks.append(np.column_stack([prev[:, prev_index[c[:-1]]] * X[:, c[-1]] for c in index[j]]))
    return blocks


def monomial_moments(X: np.ndarray, k: int) -> np.ndarray:
    """Empirical means of monomials(d, k), in that order.

    A degree-m monomial is split into a ceil(m/2) and a floor(m/2) part, so all
    of them come out of a few Gram products F_a^T F_b of low-degree feature blocks.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    half = (k + 1) // 2
    index = [
        {combo: i for i, combo in enumerate(combinations_with_replacement(range(d), j))} for j in range(half + 1)
    ]
    pairs = sorted({((m + 1) // 2, m // 2) for m in range(1, k + 1)})
    rows = max(1, MOMENT_BLOCK_ENTRIES // len(index[half]))
    sums = {pair: 0.0 for pair in pairs}
    for start in range(0, n, rows):
        blocks = _feature_blocks(X[start : start + rows], half, index)
        for a, b in pairs:
            sums[(a, b)] = sums[(a, b)] + blocks[a].T @ blocks[b]

    moments = np.empty(monomial_count(d, k))
    for i, combo in enumerate(monomials(d, k)):
        a = (len(combo) + 1) // 2
        b = len(combo) - a
        moments[i] = sums[(a, b)][index[a][combo[:a]], index[b][combo[a:]]]
    return moments / n


def default_moment_tol(k: int, n: int) -> float:
    """Ten standard errors of the degree-k monomial with the largest Gaussian variance.

    Scales as 1/sqrt(n): at a few thousand localized survivors it is a few tenths
    for k=4, so only gross moment mismatches (uniform cube, two-point mixtures)
    are caught there. Pass moment_tol to tighten it.
    """
    return 10.0 * math.sqrt(gaussian_moment(2 * k)) / math.sqrt(n)


def test_moments(S: LabeledDataset, k: int = 4, moment_tol: Optional[float] = None) -> TesterVerdict:
    require_nonempty(S)
    if k < 2:
        raise TesterConfigError(f"moment degree must be at least 2, got {k}")
    count = monomial_count(S.d, k)
    if count > MAX_MONOMIALS:
        raise TesterConfigError(f"{count} monomials of degree <= {k} in d={S.d} exceeds {MAX_MONOMIALS}")
    tol = default_moment_tol(k, S.n) if moment_tol is None else moment_tol

    deviations = np.abs(monomial_moments(S.x, k) - reference_moments(S.d, k))
    at = int(np.argmax(deviations))
    worst, worst_combo = float(deviations[at]), monomials(S.d, k)[at]
    logger.debug("worst moment deviation %.4f at %s (tol %.4f)", worst, worst_combo, tol)
    if worst <= tol:
        return TesterVerdict.accept()
    label = "*".join(f"x{axis + 1}" for axis in worst_combo)
    return TesterVerdict.reject(TestName.MOMENTS, worst, tol, f"moment E[{label}] deviates by {worst:.4f} > {tol:.4f}")


def wedge_edges(eta: float) -> np.ndarray:
    """Strictly increasing band edges along the direction.

    Bands of width eta are clipped to [-T, T], T = sqrt(log(1/eta)); the outer
    edges +-T bound the two tails. With B = ceil(T/eta) this gives 2B + 2 events.
    """
    tail = math.sqrt(math.log(1.0 / eta))
    half_bands = math.ceil(tail / eta)
    inner = np.arange(-half_bands + 1, half_bands) * eta
    inner = inner[np.abs(inner) < tail]
    return np.concatenate(([-tail], inner, [tail]))


def wedge_event_index(projections: np.ndarray, edges: np.ndarray) -> np.ndarray:
    return np.searchsorted(edges, projections, side="right")


def gaussian_event_masses(edges: np.ndarray) -> np.ndarray:
    return np.diff(special.ndtr(np.concatenate(([-np.inf], edges, [np.inf]))))


def band_floor(d: int) -> int:
    return max(20, d)


def band_spectral_bound(d: int, m: int) -> float:
    """Orthogonal-covariance bound for a band of m points: 2 (1 + sqrt((d-1)/m))^2.

    The factor is the largest-eigenvalue edge of an m-sample second moment in
    d-1 dimensions, so sparse Gaussian bands pass; it tends to 2 as m grows.
    """
    return WEDGE_SPECTRAL_BOUND * (1.0 + math.sqrt((d - 1) / m)) ** 2


def wedge_statistics(S: LabeledDataset, v, eta: float) -> WedgeStatistics:
    require_nonempty(S)
    if not 0.0 < eta < 0.5:
        raise TesterConfigError(f"wedge tolerance must lie in (0, 1/2), got {eta}")
    v = normalize(v)
    edges = wedge_edges(eta)
    proj = S.x @ v
    events = wedge_event_index(proj, edges)
    counts = np.bincount(events, minlength=edges.size + 1)
    deviation = float(np.abs(counts / S.n - gaussian_event_masses(edges)).sum())

    order = np.argsort(events, kind="stable")
    orthogonal = (S.x - np.outer(proj, v))[order]
    starts = np.concatenate(([0], np.cumsum(counts)))
    checked, worst, worst_bound, worst_band, worst_ratio = 0, 0.0, WEDGE_SPECTRAL_BOUND, None, -1.0
    for band in np.flatnonzero(counts >= band_floor(S.d)):
        norm = spectral_upper(second_moment(orthogonal[starts[band] : starts[band + 1]]))
        bound = band_spectral_bound(S.d, int(counts[band]))
        checked += 1
        if norm / bound > worst_ratio:
            worst, worst_bound, worst_band, worst_ratio = norm, bound, int(band), norm / bound
    return WedgeStatistics(
        events=int(counts.size),
        mass_deviation=deviation,
        checked_bands=checked,
        worst_band_spectral=worst,
        worst_band_bound=worst_bound,
        worst_band=worst_band,
    )


def wedge_bound_test(S: LabeledDataset, v, eta: float) -> TesterVerdict:
    return wedge_verdict(wedge_statistics(S, v, eta), eta)


def wedge_verdict(measured: WedgeStatistics, eta: float) -> TesterVerdict:
    logger.debug(
        "wedge: %d events, mass deviation %.4f (eta %g), %d bands checked, worst spectral %.3f (bound %.3f)",
        measured.events,
        measured.mass_deviation,
        eta,
        measured.checked_bands,
        measured.worst_band_spectral,
        measured.worst_band_bound,
    )
    if measured.mass_deviation > eta:
        return TesterVerdict.reject(
            TestName.WEDGE_MASS,
            measured.mass_deviation,
            eta,
            f"wedge band mass deviation = {measured.mass_deviation:.4f} > {eta:g}",
        )
    if measured.worst_band_spectral > measured.worst_band_bound:
        return TesterVerdict.reject(
            TestName.WEDGE_COVARIANCE,
            measured.worst_band_spectral,
            measured.worst_band_bound,
            f"band {measured.worst_band} orthogonal covariance spectral norm = "
            f"{measured.worst_band_spectral:.2f} > {measured.worst_band_bound:.2f}",
        )
    return TesterVerdict.accept()


# keep pytest from collecting the test_* functions when a test module imports them
for _tester in (test_covariance, test_mean, test_trimmed_stability, test_moments):
    _tester.__test__ = False
