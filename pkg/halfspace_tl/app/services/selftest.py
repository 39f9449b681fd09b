"""Invariant suite behind `selftest`: every property runs on seeded synthetic data.

Each check returns (passed, detail). run_selftest never raises; an exception
inside a check is reported as a failure of that check.
"""
from __future__ import annotations

import logging
import math
from itertools import product
from typing import Callable

import numpy as np
from pydantic import BaseModel
from scipy.special import ndtri

from ..schemas.halfspace import (
    Halfspace,
    LabeledDataset,
    LearnConfig,
    MarginalFamily,
    MarginalKind,
    NoiseProfile,
    NoiseStrategy,
)
from ..schemas.learning import ReversionBound
from ..schemas.testing import TestName
from . import oracles, testers
from .center_finder import center_quality, find_centers
from .core import (
    basis_vector,
    chow_vector,
    derive_rng,
    derive_seed,
    empirical_error,
    evaluate,
    gaussian_pdf,
    gaussian_tail,
    negate,
    normalize,
    predict,
    second_moment,
    spectral_upper,
)
from .localization import (
    apply_sqrt_sigma,
    expected_acceptance,
    from_center,
    revert_direction,
    reversion_error_bound,
    sigma_for,
    to_isotropic,
    transformed_halfspace,
)
from .learner import learn_near_homogeneous, testable_learn
from .synth import flip_count, generate, generate_with_report

logger = logging.getLogger(__name__)

Check = Callable[[int], tuple[bool, str]]


class PropertyResult(BaseModel):
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} {self.detail}"


def _gaussian(d: int, n: int, seed: int, truth: Halfspace | None = None) -> LabeledDataset:
    truth = truth or Halfspace(v=basis_vector(d), t=0.0)
    return generate(d, n, MarginalKind(), truth, NoiseProfile(), seed)


def check_rejection_law(seed: int) -> tuple[bool, str]:
    S = _gaussian(5, 1_000_000, derive_seed(seed, "rejection_law"))
    params = from_center(2.0 * basis_vector(5))
    law = oracles.rejection_law(S, params, derive_seed(seed, "rejection_law_filter"))
    ok = abs(law.acceptance_fraction - 0.03474) <= 0.002 and law.ks_along <= 0.03 and law.ks_orthogonal <= 0.03
    return ok, (
        f"acceptance={law.acceptance_fraction:.5f} ks_along={law.ks_along:.4f} "
        f"ks_orthogonal={law.ks_orthogonal:.4f} mean_error={law.mean_error:.4f}"
    )


def check_acceptance_rates(seed: int) -> tuple[bool, str]:
    n = 1_000_000
    S = _gaussian(5, n, derive_seed(seed, "acceptance_rates"))
    parts = []
    ok = True
    for scale in (1.0, 2.0, 3.0):
        params = from_center(scale * basis_vector(5))
        expected = expected_acceptance(params)
        realized = oracles.rejection_law(S, params, derive_seed(seed, "acceptance_filter", int(scale))).acceptance_fraction
        tolerance = 4.0 * math.sqrt(expected * (1.0 - expected) / n)
        ok &= abs(realized - expected) <= tolerance
        ok &= realized >= 0.1 * gaussian_tail(scale) or scale < math.sqrt(2.0)
        parts.append(f"|w|={scale:g}:{realized:.5f}/{expected:.5f}")
    return ok, " ".join(parts)


def check_chow_identity(seed: int) -> tuple[bool, str]:
    parts = []
    ok = True
    v = basis_vector(5)
    for t in (0.0, 1.0, 2.0):
        S = _gaussian(5, 1_000_000, derive_seed(seed, "chow", int(t)), Halfspace(v=v, t=t))
        gap = float(np.linalg.norm(chow_vector(S) - oracles.chow_norm(t) * v))
        ok &= gap <= 0.02
        parts.append(f"t={t:g}:{gap:.4f}")
    return ok, " ".join(parts)


def check_reversion(seed: int) -> tuple[bool, str]:
    rng = derive_rng(seed, "reversion")
    worst_round_trip = 0.0
    for _ in range(100):
        w = rng.standard_normal(5) * rng.uniform(0.5, 4.0)
        params = from_center(w)
        v_star = normalize(rng.standard_normal(5))
        back = revert_direction(normalize(apply_sqrt_sigma(params, v_star)), params)
        worst_round_trip = max(worst_round_trip, float(np.linalg.norm(back - v_star)))
    worst_ratio = 0.0
    for _ in range(10_000):
        inst = oracles.reversion_instance(rng)
        bound = reversion_error_bound(ReversionBound(sigma=inst.sigma, beta=inst.beta, delta=inst.delta))
        if inst.error > 0:
            worst_ratio = max(worst_ratio, inst.error / bound if bound > 0 else math.inf)
    ok = worst_round_trip <= 1e-9 and worst_ratio <= 1.0
    return ok, f"round_trip={worst_round_trip:.2e} worst_error_over_bound={worst_ratio:.3f}"


def check_wedge_transfer(seed: int) -> tuple[bool, str]:
    eta = 0.05
    n = 200_000
    S = _gaussian(5, n, derive_seed(seed, "wedge"))
    rng = derive_rng(seed, "wedge_pairs")
    truth = Halfspace(v=basis_vector(5), t=0.5)
    verdict = testers.wedge_bound_test(S, truth.v, eta)
    if not verdict:
        return False, f"wedge test rejected Gaussian data: {verdict}"
    worst = 0.0
    ok = True
    for _ in range(5):
        delta = float(rng.uniform(0.0, 0.1))
        v = normalize(truth.v + delta * 0.999 * normalize(rng.standard_normal(5)))
        other = Halfspace(v=v, t=truth.t + float(rng.uniform(-eta, eta)))
        exact = oracles.halfspace_disagreement(truth, other)
        labels_truth = np.where(S.x @ truth.v + truth.t >= 0, 1, -1).astype(np.int8)
        empirical = empirical_error(other, LabeledDataset(x=S.x, y=labels_truth))
        standard_error = math.sqrt(max(exact * (1.0 - exact), 1.0 / n) / n)
        ok &= empirical <= 8.0 * (delta + eta)
        ok &= abs(empirical - exact) <= 4.0 * standard_error
        worst = max(worst, abs(empirical - exact) / standard_error)
    return ok, f"worst deviation from quadrature = {worst:.2f} standard errors"


def check_band_claim(seed: int) -> tuple[bool, str]:
    rng = derive_rng(seed, "band_claim")
    v = basis_vector(5)
    u = basis_vector(5, 1)
    worst = 0.0
    ok = True
    for delta, eta in ((0.05, 0.05), (0.1, 0.1), (0.02, 0.1)):
        p = oracles.band_claim_probability(v, u, 1.0, delta, eta, 200_000, rng)
        ok &= p <= 8.0 * (delta + eta)
        worst = max(worst, p / (delta + eta))
    return ok, f"worst probability / (delta + eta) = {worst:.3f}"


def check_tail_ratio(seed: int) -> tuple[bool, str]:
    ratios = [oracles.tail_ratio(x, 1.0 / x) for x in np.linspace(10.0, 20.0, 11)]
    return min(ratios) >= 0.1, f"min ratio = {min(ratios):.4f}"


def check_derivative_identity(seed: int) -> tuple[bool, str]:
    step = 1e-5
    worst = max(
        abs((gaussian_tail(t + step) - gaussian_tail(t - step)) / (2 * step) + gaussian_pdf(t))
        for t in np.linspace(-4.0, 4.0, 20)
    )
    return worst <= 1e-6, f"max residual = {worst:.2e}"


def check_sign_convention(seed: int) -> tuple[bool, str]:
    h = Halfspace(v=basis_vector(3), t=-0.5)
    cases = {0.3: -1, 0.5: 1, 0.7: 1}
    got = {x: evaluate(h, np.array([x, 0.0, 0.0])) for x in cases}
    origin = evaluate(Halfspace(v=basis_vector(3)), np.zeros(3))
    return got == cases and origin == 1, f"labels={got} origin={origin:+d}"


def check_label_complement(seed: int) -> tuple[bool, str]:
    S = _gaussian(5, 10_000, derive_seed(seed, "complement"))
    h = Halfspace(v=normalize(np.arange(1.0, 6.0)), t=0.3)
    total = empirical_error(h, S) + empirical_error(negate(h), S)
    return abs(total - 1.0) <= 1e-12, f"sum = {total:.12f}"


def check_sigma_scale(seed: int) -> tuple[bool, str]:
    worst = math.inf
    for beta in (0.3, 0.1, 0.01, 0.001):
        norm = float(-ndtri(beta))
        worst = min(worst, sigma_for(norm * basis_vector(2)) * math.sqrt(math.log(1.0 / beta)))
    return worst >= 0.3, f"min sigma*sqrt(log(1/beta)) = {worst:.3f}"


def check_tester_completeness(seed: int) -> tuple[bool, str]:
    S = _gaussian(5, 100_000, derive_seed(seed, "completeness"))
    proj = S.x[:, 0]
    verdicts = {
        "covariance": testers.test_covariance(S, 2.0),
        "mean": testers.test_mean(S, 0.05),
        "kolmogorov": testers.ks_test(proj, 0.05),
        "trimmed": testers.test_trimmed_stability(proj, 0.05),
        "moments": testers.test_moments(S, 4),
        "wedge": testers.wedge_bound_test(S, basis_vector(5), 0.1),
    }
    failed = [name for name, verdict in verdicts.items() if not verdict]
    return not failed, "all accept" if not failed else f"rejected by {', '.join(failed)}"


def check_tester_soundness(seed: int) -> tuple[bool, str]:
    truth = Halfspace(v=basis_vector(5), t=0.0)

    def foil(family: MarginalFamily, parameter: float | None = None) -> LabeledDataset:
        marginal = MarginalKind(family=family, parameter=parameter)
        return generate(5, 100_000, marginal, truth, NoiseProfile(), derive_seed(seed, family.value))

    scaled = testers.test_covariance(foil(MarginalFamily.SCALED_GAUSSIAN, math.sqrt(3.0)), 2.0)
    cube = testers.test_moments(foil(MarginalFamily.UNIFORM_CUBE), 4)
    two_point_data = foil(MarginalFamily.TWO_POINT_MIXTURE)
    two_point = testers.ks_test(two_point_data.x[:, 0], 0.05)
    if two_point:
        two_point = testers.test_moments(two_point_data, 4)
    ok = not scaled and not cube and not two_point
    names = [v.diagnostic.test.value if not v else "accepted" for v in (scaled, cube, two_point)]
    ok &= names[0] == TestName.COVARIANCE.value and names[1] == TestName.MOMENTS.value
    return ok, f"scaled->{names[0]} uniform_cube->{names[1]} two_point->{names[2]}"


def check_synth_determinism(seed: int) -> tuple[bool, str]:
    truth = Halfspace(v=basis_vector(5), t=-1.0)
    noise = NoiseProfile(budget=0.02, strategy=NoiseStrategy.TAIL_FLIP)
    first = generate(5, 5_000, MarginalKind(), truth, noise, derive_seed(seed, "determinism"))
    second = generate(5, 5_000, MarginalKind(), truth, noise, derive_seed(seed, "determinism"))
    same = np.array_equal(first.x, second.x) and np.array_equal(first.y, second.y)
    return same, "identical" if same else "datasets differ"


def check_gaussian_sample_moments(seed: int) -> tuple[bool, str]:
    n = 10_000
    worst_mean = worst_spectral = 0.0
    for d in (5, 20):
        scale = math.sqrt(d / n)
        for i in range(3):
            x = _gaussian(d, n, derive_seed(seed, "gaussian_moments", d, i)).x
            worst_mean = max(worst_mean, float(np.linalg.norm(x.mean(axis=0))) / (4.0 * scale))
            worst_spectral = max(worst_spectral, abs(spectral_upper(second_moment(x)) - 1.0) / (10.0 * scale))
    ok = worst_mean <= 1.0 and worst_spectral <= 1.0
    return ok, f"mean/bound={worst_mean:.3f} spectral/bound={worst_spectral:.3f}"


def check_tail_flip_minority(seed: int) -> tuple[bool, str]:
    n = 20_000
    truth = Halfspace(v=basis_vector(5), t=-1.0)
    parts = []
    ok = True
    # the second budget exceeds the minority mass, so every minority point flips
    for budget in (0.02, 0.3):
        noise = NoiseProfile(budget=budget, strategy=NoiseStrategy.TAIL_FLIP)
        S, report = generate_with_report(5, n, MarginalKind(), truth, noise, derive_seed(seed, "tail_flip", int(budget * 100)))
        clean = predict(truth, S.x)
        flipped = S.y != clean
        minority = 1 if np.count_nonzero(clean == 1) <= n / 2 else -1
        minority_count = int(np.count_nonzero(clean == minority))
        ok &= report.minority_label == minority
        ok &= bool(np.all(clean[flipped] == minority))
        ok &= int(np.count_nonzero(flipped)) == report.realized_flips == min(flip_count(budget, n), minority_count)
        parts.append(f"b={budget:g}:{report.realized_flips}/{report.requested_flips}")
    return ok, " ".join(parts)


def check_scaled_gaussian_fires(seed: int) -> tuple[bool, str]:
    marginal = MarginalKind(family=MarginalFamily.SCALED_GAUSSIAN, parameter=math.sqrt(2.0))
    truth = Halfspace(v=basis_vector(5), t=0.0)
    hits = 0
    for i in range(100):
        S = generate(5, 10_000, marginal, truth, NoiseProfile(), derive_seed(seed, "scaled", i))
        hits += spectral_upper(second_moment(S.x)) > 1.8
    return hits >= 99, f"{hits}/100 above 1.8"


def check_spectral_homogeneity(seed: int) -> tuple[bool, str]:
    rng = derive_rng(seed, "homogeneity")
    worst = 0.0
    for _ in range(10):
        q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        M = q @ np.diag(rng.uniform(0.1, 4.0, 5)) @ q.T
        base = spectral_upper(M)
        for alpha in (0.5, 2.0, 10.0):
            worst = max(worst, abs(spectral_upper(alpha * M) - alpha * base) / (alpha * base))
    return worst <= 1e-5, f"worst relative gap = {worst:.2e}"


def check_label_preservation(seed: int) -> tuple[bool, str]:
    rng = derive_rng(seed, "label_preservation")
    mismatches = 0
    for _ in range(20):
        params = from_center(rng.standard_normal(5) * rng.uniform(0.5, 4.0))
        h = Halfspace(v=normalize(rng.standard_normal(5)), t=float(rng.uniform(-2.0, 2.0)))
        x = 2.0 * rng.standard_normal((10_000, 5))
        moved = transformed_halfspace(params, h)
        # points within rounding of the boundary may land on either side
        clear = np.abs(x @ h.v + h.t) > 1e-9
        mismatches += int(np.count_nonzero(predict(h, x)[clear] != predict(moved, to_isotropic(params, x))[clear]))
    return mismatches == 0, f"{mismatches} label changes"


def _tail_flip_sample(t_star: float, budget: float, n: int, seed: int) -> tuple[Halfspace, LabeledDataset]:
    truth = Halfspace(v=basis_vector(5), t=-t_star)
    noise = NoiseProfile(budget=budget, strategy=NoiseStrategy.TAIL_FLIP)
    return truth, generate(5, n, MarginalKind(), truth, noise, seed)


def check_good_center(seed: int) -> tuple[bool, str]:
    eps = 0.1
    parts = []
    ok = True
    for t_star, budget in product((1.0, 2.0), (0.0, 0.005)):
        truth, S = _tail_flip_sample(t_star, budget, 200_000, derive_seed(seed, "good_center", int(t_star), int(budget * 1000)))
        result = find_centers(S, eps)
        if not result.verdict:
            ok = False
            parts.append(f"t*={t_star:g},opt={budget:g}:rejected")
            continue
        minority = min(tail.minority_mass for tail in result.tails)
        floor = 0.05 * minority / math.log(1.0 / minority)
        good = [
            (alpha, beta)
            for alpha, beta in (center_quality(c, truth) for c in result.candidates)
            if alpha <= eps**2 + 0.01 and beta >= floor
        ]
        ok &= bool(good)
        parts.append(f"t*={t_star:g},opt={budget:g}:{len(good)} good")
    return ok, " ".join(parts)


def check_center_completeness(seed: int) -> tuple[bool, str]:
    accepted = 0
    for i in range(10):
        _, S = _tail_flip_sample(1.0, 0.005 * (i % 2), 100_000, derive_seed(seed, "center_completeness", i))
        accepted += bool(find_centers(S, 0.1).verdict)
    return accepted >= 9, f"{accepted}/10 lists returned"


def check_homogeneous_sanity(seed: int) -> tuple[bool, str]:
    eps = 0.1
    truth, S = _tail_flip_sample(0.0, 0.0, 200_000, derive_seed(seed, "homogeneous"))
    direct = learn_near_homogeneous(S, eps, derive_seed(seed, "homogeneous_direct"))
    outcome = testable_learn(S, LearnConfig(epsilon=eps, seed=derive_seed(seed, "homogeneous_pipeline")))
    if not direct.verdict or not outcome.accepted:
        return False, f"direct={direct.verdict} pipeline={outcome.verdict}"
    direct_error = oracles.halfspace_disagreement(Halfspace(v=direct.direction, t=0.0), truth)
    pipeline_error = oracles.halfspace_disagreement(outcome.chosen, truth)
    # ratio floored at eps/10 for near-zero errors
    ok = pipeline_error <= 2.0 * max(direct_error, eps / 10.0)
    return ok, f"pipeline={pipeline_error:.4f} direct={direct_error:.4f}"


def check_error_guarantee(seed: int) -> tuple[bool, str]:
    eps, budget = 0.1, 0.005
    truth, S = _tail_flip_sample(1.0, budget, 200_000, derive_seed(seed, "guarantee"))
    outcome = testable_learn(S, LearnConfig(epsilon=eps, seed=derive_seed(seed, "guarantee_learn")))
    if not outcome.accepted:
        return False, f"rejected: {outcome.verdict.diagnostic}"
    _, holdout = _tail_flip_sample(1.0, budget, 100_000, derive_seed(seed, "guarantee_holdout"))
    error = empirical_error(outcome.chosen, holdout)
    bound = 10.0 * math.sqrt(budget) + eps
    return error <= bound, f"holdout error {error:.4f} <= {bound:.4f}"


CHECKS: list[tuple[str, Check]] = [
    ("sign_convention", check_sign_convention),
    ("synth_determinism", check_synth_determinism),
    ("gaussian_sample_moments", check_gaussian_sample_moments),
    ("tail_flip_minority", check_tail_flip_minority),
    ("scaled_gaussian_fires", check_scaled_gaussian_fires),
    ("spectral_homogeneity", check_spectral_homogeneity),
    ("label_complement", check_label_complement),
    ("tail_derivative", check_derivative_identity),
    ("rejection_law", check_rejection_law),
    ("acceptance_rates", check_acceptance_rates),
    ("sigma_scale", check_sigma_scale),
    ("label_preservation", check_label_preservation),
    ("chow_identity", check_chow_identity),
    ("reversion", check_reversion),
    ("wedge_transfer", check_wedge_transfer),
    ("band_claim", check_band_claim),
    ("tail_ratio", check_tail_ratio),
    ("tester_completeness", check_tester_completeness),
    ("tester_soundness", check_tester_soundness),
    ("center_completeness", check_center_completeness),
    ("good_center", check_good_center),
    ("homogeneous_sanity", check_homogeneous_sanity),
    ("error_guarantee", check_error_guarantee),
]


def run_selftest(seed: int = 0) -> list[PropertyResult]:
    results = []
    for name, check in CHECKS:
        try:
            passed, detail = check(seed)
        except Exception as e:  # noqa: BLE001
            logger.exception("property %s raised", name)
            passed, detail = False, f"raised {type(e).__name__}: {e}"
        results.append(PropertyResult(name=name, passed=bool(passed), detail=detail))
        logger.debug("%s: %s", name, detail)
    return results
