import math

import numpy as np
import pytest

from halfspace_tl.app.schemas.halfspace import Halfspace, LabeledDataset
from halfspace_tl.app.schemas.learning import RejectionParams, ReversionBound
from halfspace_tl.app.services import localization, oracles
from halfspace_tl.app.services.core import (
    DegenerateVectorError,
    DimensionMismatchError,
    basis_vector,
    derive_rng,
    gaussian_cdf,
    normalize,
    predict,
)
from halfspace_tl.app.services.localization import (
    InsufficientLocalizedMassError,
    InvalidScaleError,
    accept_probability,
    expected_acceptance,
    from_center,
    localized_distance,
    reject_filter,
    revert_direction,
    reversion_error_bound,
    sigma_for,
    squeeze,
    to_isotropic,
    transformed_halfspace,
)


@pytest.fixture
def two_e1():
    return RejectionParams(direction=basis_vector(3), offset=2.0, sigma=0.5)


def test_sigma_for_known_values():
    assert sigma_for(4.0 * basis_vector(3)) == 0.25
    assert sigma_for(basis_vector(3)) == pytest.approx(math.sqrt(0.5))
    assert sigma_for(math.sqrt(2.0) * basis_vector(3)) == pytest.approx(math.sqrt(0.5))
    with pytest.raises(DegenerateVectorError):
        sigma_for(np.zeros(3))


def test_from_center_matches_sigma_for():
    p = from_center([0.0, 3.0, 4.0])
    assert p.offset == pytest.approx(5.0)
    assert p.sigma == pytest.approx(0.2)
    assert np.allclose(p.center, [0.0, 3.0, 4.0])


def test_accept_probability_known_values(two_e1):
    assert accept_probability(two_e1, two_e1.peak * basis_vector(3)) == pytest.approx(1.0)
    assert two_e1.peak == pytest.approx(8.0 / 3.0)
    assert accept_probability(two_e1, np.zeros(3)) == pytest.approx(math.exp(-32.0 / 3.0), rel=1e-12)
    assert expected_acceptance(two_e1) == pytest.approx(0.5 * math.exp(-8.0 / 3.0), rel=1e-12)
    assert expected_acceptance(two_e1) == pytest.approx(0.03474, abs=1e-5)


def test_accept_probability_is_bounded(two_e1):
    x = derive_rng(0, "bounded").standard_normal((1_000, 3)) * 3
    probs = localization.accept_probabilities(two_e1, x)
    assert np.all((probs >= 0.0) & (probs <= 1.0))


@pytest.mark.parametrize("sigma", [0.0, 1.0, 1.5, -0.2])
def test_invalid_scale(sigma):
    with pytest.raises((InvalidScaleError, ValueError)):
        squeeze(basis_vector(3), sigma)


def test_filter_keeps_everything_at_the_peak():
    p = squeeze(basis_vector(4), 0.5)
    x = derive_rng(0, "peak").standard_normal((300, 4))
    x[:, 0] = p.peak
    S = LabeledDataset(x=x, y=np.ones(300))
    result = reject_filter(S, p, seed=1)
    assert result.acceptance_fraction == 1.0
    assert np.array_equal(result.dataset.x, S.x)


def test_filter_rate_and_order(make_dataset):
    S = make_dataset(d=5, n=100_000, seed=12)
    p = from_center(2.0 * basis_vector(5))
    result = reject_filter(S, p, seed=3)
    assert result.acceptance_fraction == pytest.approx(0.0347, abs=0.002)

    # survivors keep their original order
    rows = {tuple(row): i for i, row in enumerate(S.x)}
    positions = [rows[tuple(row)] for row in result.dataset.x]
    assert positions == sorted(positions)


def test_filter_is_seeded(make_dataset):
    S = make_dataset(d=5, n=20_000, seed=13)
    p = from_center(1.5 * basis_vector(5))
    a = reject_filter(S, p, seed=5)
    b = reject_filter(S, p, seed=5)
    c = reject_filter(S, p, seed=6)
    assert np.array_equal(a.dataset.x, b.dataset.x)
    assert not np.array_equal(a.dataset.x, c.dataset.x)


def test_filter_errors(make_dataset):
    S = make_dataset(d=5, n=1_000, seed=14)
    with pytest.raises(InsufficientLocalizedMassError) as info:
        reject_filter(S, from_center(6.0 * basis_vector(5)), seed=0)
    assert info.value.required == 100
    with pytest.raises(DimensionMismatchError):
        reject_filter(S, from_center(2.0 * basis_vector(3)), seed=0)


def test_survivors_follow_the_localized_law(make_dataset):
    S = make_dataset(d=5, n=1_000_000, seed=15)
    law = oracles.rejection_law(S, from_center(2.0 * basis_vector(5)), seed=16)
    assert law.acceptance_fraction == pytest.approx(0.03474, abs=0.002)
    assert law.ks_along <= 0.03
    assert law.ks_orthogonal <= 0.03
    assert law.mean_error <= 0.05


def test_printed_sign_breaks_the_law(monkeypatch, make_dataset):
    # with the plus sign the acceptance peak sits at -w instead of past +w
    monkeypatch.setattr(
        RejectionParams, "peak", property(lambda self: -self.offset / (1.0 - self.sigma**2))
    )
    S = make_dataset(d=5, n=1_000_000, seed=15)
    law = oracles.rejection_law(S, from_center(2.0 * basis_vector(5)), seed=16)
    assert law.ks_along > 0.5
    assert law.mean_error > 3.0


def test_to_isotropic_known_values(two_e1):
    assert np.allclose(to_isotropic(two_e1, two_e1.center), 0.0)
    assert np.allclose(to_isotropic(two_e1, [3.0, 1.0, 0.0]), [2.0, 1.0, 0.0])


def test_isotropic_round_trip():
    gen = derive_rng(1, "round_trip")
    for _ in range(100):
        p = from_center(gen.standard_normal(6) * 3)
        x = gen.standard_normal((4, 6))
        assert np.allclose(localization.from_isotropic(p, to_isotropic(p, x)), x, atol=1e-10)


def test_transformed_halfspace_known_values(two_e1):
    h = transformed_halfspace(two_e1, Halfspace(v=basis_vector(3), t=-2.0))
    assert np.allclose(h.v, basis_vector(3))
    assert h.t == pytest.approx(0.0, abs=1e-12)

    e2 = basis_vector(3, 1)
    h = transformed_halfspace(two_e1, Halfspace(v=e2, t=0.0))
    assert np.allclose(h.v, e2)
    assert h.t == pytest.approx(0.0, abs=1e-12)


def test_transformed_halfspace_keeps_labels():
    gen = derive_rng(2, "labels")
    p = from_center(gen.standard_normal(5) * 2)
    h = Halfspace(v=normalize(gen.standard_normal(5)), t=0.3)
    x = gen.standard_normal((5_000, 5)) * 2
    assert np.array_equal(predict(h, x), predict(transformed_halfspace(p, h), to_isotropic(p, x)))


def test_revert_direction_known_values(two_e1):
    assert np.allclose(revert_direction(basis_vector(3), two_e1), basis_vector(3))
    v = normalize([0.0, 1.0, -1.0])
    assert np.allclose(revert_direction(v, two_e1), v)


def test_revert_undoes_the_stretch():
    gen = derive_rng(3, "revert")
    for _ in range(100):
        p = from_center(gen.standard_normal(5) * 3)
        v_star = normalize(gen.standard_normal(5))
        stretched = localization.apply_sqrt_sigma(p, v_star)
        assert np.allclose(revert_direction(stretched, p), v_star, atol=1e-10)


def test_reversion_bound_known_values():
    assert reversion_error_bound(ReversionBound(sigma=0.5, beta=0.4, delta=0.0)) == 0.0
    assert reversion_error_bound(ReversionBound(sigma=0.3, beta=0.0, delta=0.05)) == pytest.approx(
        localization.REVERSION_CONSTANT * 0.05 * 0.3
    )
    with pytest.raises(InvalidScaleError):
        reversion_error_bound(ReversionBound(sigma=0.5, beta=1.5, delta=0.01))


def test_reversion_bound_grows_with_delta_and_beta():
    base = reversion_error_bound(ReversionBound(sigma=0.5, beta=0.5, delta=0.02))
    assert reversion_error_bound(ReversionBound(sigma=0.5, beta=0.5, delta=0.04)) > base
    assert reversion_error_bound(ReversionBound(sigma=0.5, beta=0.8, delta=0.02)) > base


def test_reversion_bound_covers_random_instances():
    gen = derive_rng(4, "reversion")
    for _ in range(1_000):
        inst = oracles.reversion_instance(gen)
        bound = reversion_error_bound(ReversionBound(sigma=inst.sigma, beta=inst.beta, delta=inst.delta))
        assert inst.error <= bound + 1e-12


def test_localized_distance_known_values(two_e1):
    assert localized_distance(two_e1, two_e1) == pytest.approx(0.0, abs=1e-7)
    shifted = RejectionParams(direction=basis_vector(3), offset=2.1, sigma=0.5)
    # equal covariances: BC = exp(-gap^2 / (8 sigma^2))
    assert localized_distance(two_e1, shifted) == pytest.approx(math.sqrt(1.0 - math.exp(-0.01)), rel=1e-9)
    exact = 2.0 * gaussian_cdf(0.1 / (2 * 0.5)) - 1.0
    assert exact <= localized_distance(two_e1, shifted)
    assert localized_distance(shifted, two_e1) == pytest.approx(localized_distance(two_e1, shifted))


def test_localized_distance_grows_along_a_ray():
    e1 = basis_vector(4)
    start = from_center(2.0 * e1)
    gaps = [localized_distance(start, from_center((2.0 + step) * e1)) for step in (0.01, 0.05, 0.2, 1.0)]
    assert all(a < b for a, b in zip(gaps, gaps[1:]))
    assert localized_distance(from_center(2.0 * e1), from_center(2.0 * basis_vector(4, 1))) > 0.95
