"""Shared numerics: hypothesis evaluation, Gaussian special functions, spectral norm, seeding.

Everything here is pure; arrays handed out are read-only views or fresh copies.

Seed derivation:
    derive_rng(seed, role, *index) builds a PCG64 generator from
    SeedSequence([seed, crc32(role), *index]), so two subsystems with different
    role tags (or indices) never share a stream, and the stream for a given
    position does not depend on how many other streams were drawn before it.
"""
from __future__ import annotations

import logging
import math
import zlib
from typing import Sequence

import numpy as np
from scipy import special

from ..schemas.halfspace import Halfspace, LabeledDataset

logger = logging.getLogger(__name__)

DEGENERATE_NORM = 1e-12
POWER_ITERATION_CAP = 1000
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class HalfspaceError(ValueError):
    pass


class DimensionMismatchError(HalfspaceError):
    pass


class DegenerateVectorError(HalfspaceError):
    pass


class EmptyDatasetError(HalfspaceError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, iterations: int, last_residual: float):
        super().__init__(
            f"power iteration did not converge after {iterations} iterations (last relative residual {last_residual:.3e})"
        )
        self.iterations = iterations
        self.last_residual = last_residual


def normalize(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if norm < DEGENERATE_NORM:
        raise DegenerateVectorError(f"cannot normalize a vector of norm {norm:.3e}")
    return arr / norm


def make_halfspace(v, t: float = 0.0) -> Halfspace:
    return Halfspace(v=normalize(v), t=t)


def basis_vector(d: int, axis: int = 0) -> np.ndarray:
    e = np.zeros(d)
    e[axis] = 1.0
    return e


def negate(h: Halfspace) -> Halfspace:
    return Halfspace(v=-h.v, t=-h.t)


def require_nonempty(S: LabeledDataset, what: str = "dataset") -> None:
    if S.n == 0:
        raise EmptyDatasetError(f"{what} is empty")


def evaluate(h: Halfspace, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (h.d,):
        raise DimensionMismatchError(f"point has shape {x.shape}, halfspace has dimension {h.d}")
    if h.is_constant:
        return 1 if h.t > 0 else -1
    return 1 if float(h.v @ x) + h.t >= 0.0 else -1


def predict(h: Halfspace, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != h.d:
        raise DimensionMismatchError(f"points have shape {X.shape}, halfspace has dimension {h.d}")
    if h.is_constant:
        return np.full(X.shape[0], 1 if h.t > 0 else -1, dtype=np.int8)
    return np.where(X @ h.v + h.t >= 0.0, 1, -1).astype(np.int8)


def empirical_error(h: Halfspace, S: LabeledDataset) -> float:
    require_nonempty(S)
    return float(np.count_nonzero(predict(h, S.x) != S.y)) / S.n


def threshold_errors(direction: np.ndarray, thresholds: Sequence[float], S: LabeledDataset) -> np.ndarray:
    """Empirical errors of sign(direction·x + t) for every t, from one sort of the projections."""
    require_nonempty(S)
    proj = S.x @ np.asarray(direction, dtype=np.float64)
    order = np.argsort(proj, kind="stable")
    proj = proj[order]
    positive = (S.y[order] == 1)
    pos_below = np.concatenate(([0], np.cumsum(positive)))
    neg_below = np.concatenate(([0], np.cumsum(~positive)))
    total_neg = neg_below[-1]
    # points with proj < -t are predicted -1; the rest (proj + t >= 0) are predicted +1
    cut = np.searchsorted(proj, -np.asarray(thresholds, dtype=np.float64), side="left")
    mistakes = pos_below[cut] + (total_neg - neg_below[cut])
    return mistakes / S.n


def chow_vector(S: LabeledDataset) -> np.ndarray:
    require_nonempty(S)
    return (S.y.astype(np.float64) @ S.x) / S.n


def second_moment(X: np.ndarray) -> np.ndarray:
    return (X.T @ X) / X.shape[0]


def gaussian_tail(t) -> float | np.ndarray:
    """Upper tail Pr[N(0,1) > t]."""
    return special.ndtr(-np.asarray(t, dtype=np.float64)) if np.ndim(t) else float(special.ndtr(-float(t)))


def gaussian_cdf(t) -> float | np.ndarray:
    return special.ndtr(np.asarray(t, dtype=np.float64)) if np.ndim(t) else float(special.ndtr(float(t)))


def gaussian_pdf(t) -> float | np.ndarray:
    if np.ndim(t):
        arr = np.asarray(t, dtype=np.float64)
        return _INV_SQRT_2PI * np.exp(-0.5 * arr * arr)
    return _INV_SQRT_2PI * math.exp(-0.5 * float(t) ** 2)


def spectral_upper(M: np.ndarray, tol: float = 1e-6) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration from the all-ones vector.

    The iterate is multiplied by M, M^2, M^4, ... (the operator is squared every
    step), so nearly tied top eigenvalues separate after a few dozen steps.
    Stops once the residual |Mx - lambda x| is at most tol * lambda. A PSD input
    always gets there; the cap is reached only when eigenvalues of equal
    magnitude and opposite sign stall the iterate.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {M.shape}")
    scale = float(np.abs(M).max()) if M.size else 0.0
    if scale == 0.0:
        return 0.0
    A = M / scale
    x = np.ones(M.shape[0]) / math.sqrt(M.shape[0])
    residual = math.inf
    for iteration in range(1, POWER_ITERATION_CAP + 1):
        Mx = M @ x
        lam = float(x @ Mx)
        residual = float(np.linalg.norm(Mx - lam * x)) / max(abs(lam), DEGENERATE_NORM * scale)
        if residual <= tol:
            logger.debug("spectral_upper converged in %d iterations: %.6g", iteration, lam)
            return lam
        y = A @ x
        y_norm = float(np.linalg.norm(y))
        if y_norm == 0.0:
            # x lies in the null space of every remaining power
            return max(lam, 0.0)
        x = y / y_norm
        A = A @ A
        A /= max(float(np.abs(A).max()), DEGENERATE_NORM)
    raise ConvergenceError(POWER_ITERATION_CAP, residual)


def derive_seed_sequence(seed: int, role: str, *index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), zlib.crc32(role.encode("utf-8")), *(int(i) for i in index)])


def derive_rng(seed: int, role: str, *index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed_sequence(seed, role, *index)))


def derive_seed(seed: int, role: str, *index: int) -> int:
    lo, hi = derive_seed_sequence(seed, role, *index).generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)
