import math

import numpy as np
import pytest

from halfspace_tl.app.schemas.halfspace import (
    Halfspace,
    LabeledDataset,
    MarginalFamily,
    MarginalKind,
    NoiseProfile,
    NoiseStrategy,
)
from halfspace_tl.app.schemas.learning import CandidateSource, CenterCandidate
from halfspace_tl.app.schemas.testing import TestName
from halfspace_tl.app.services import oracles
from halfspace_tl.app.services.center_finder import (
    CHOW_GRID_REACH,
    chow_floor,
    EmptyTailError,
    center_quality,
    chow_center_search,
    find_centers,
    minority_label,
    minority_mass,
    ray_cap,
    tail_mean,
)
from halfspace_tl.app.services.core import basis_vector, chow_vector, derive_rng, derive_seed, gaussian_tail, normalize


def test_tail_mean_two_points():
    S = LabeledDataset(x=[[1.0, 0.0], [-1.0, 0.0]], y=[1, -1])
    tail = tail_mean(S, 1)
    assert np.array_equal(tail.tail_mean, [1.0, 0.0])
    assert tail.minority_mass == 0.5
    assert tail.count == 1


def test_tail_mean_empty_label():
    S = LabeledDataset(x=[[1.0, 0.0], [2.0, 0.0]], y=[1, 1])
    with pytest.raises(EmptyTailError):
        tail_mean(S, -1)


def test_tail_means_reflect_on_symmetric_data():
    x = np.random.default_rng(0).standard_normal((2_000, 3))
    x = np.vstack([x, -x])
    S = LabeledDataset(x=x, y=np.where(x[:, 0] >= 0, 1, -1))
    plus, minus = tail_mean(S, 1), tail_mean(S, -1)
    assert np.allclose(plus.tail_mean, -minus.tail_mean, atol=1e-12)


def test_tail_mean_matches_truncated_gaussian(make_dataset):
    S = make_dataset(d=5, n=1_000_000, seed=1, t=-2.0)
    mu = tail_mean(S, 1).tail_mean
    assert mu[0] == pytest.approx(oracles.truncated_gaussian_mean(2.0), abs=0.05)
    assert oracles.truncated_gaussian_mean(2.0) == pytest.approx(2.3732, abs=1e-4)
    assert np.linalg.norm(mu[1:]) <= 0.05


def test_hyperplane_meets_tail_ray_before_tail_mean(make_dataset):
    S = make_dataset(d=5, n=200_000, seed=2, t=-2.0)
    mu = tail_mean(S, 1).tail_mean
    direction = mu / np.linalg.norm(mu)
    # the hyperplane x1 = 2 crosses the ray at lambda = 2 / direction[0]
    assert 2.0 / direction[0] <= np.linalg.norm(mu)


def test_find_centers_clean_sample_has_good_center(make_dataset):
    eps = 0.1
    truth = Halfspace(v=basis_vector(5), t=-1.0)
    S = make_dataset(d=5, n=200_000, seed=3, t=-1.0)
    result = find_centers(S, eps)
    assert result.verdict
    assert not result.imbalanced
    assert [tail.tail_label for tail in result.tails] == [1, -1]

    sources = [c.source for c in result.candidates]
    assert sources == sorted(sources, key=[CandidateSource.TAIL_MEAN_PLUS, CandidateSource.TAIL_MEAN_MINUS, CandidateSource.CHOW_PATH].index)

    good = [c for c in result.candidates if center_quality(c, truth)[0] <= eps**2 + 0.02]
    assert good
    minority = min(tail.minority_mass for tail in result.tails)
    floor = 0.05 * minority / math.log(1.0 / minority)
    assert any(center_quality(c, truth)[1] >= floor for c in good)


def test_tail_ray_respects_list_cap(make_dataset):
    eps = 0.1
    S = make_dataset(d=5, n=100_000, seed=4, t=-1.5)
    result = find_centers(S, eps)
    assert result.verdict
    minority = result.tails[0].minority_mass
    for source in (CandidateSource.TAIL_MEAN_PLUS, CandidateSource.TAIL_MEAN_MINUS):
        count = sum(1 for c in result.candidates if c.source is source)
        assert count <= ray_cap(minority, eps)


def test_find_centers_rejects_scaled_marginal(make_dataset):
    S = make_dataset(n=50_000, seed=5, marginal=MarginalKind(family=MarginalFamily.SCALED_GAUSSIAN, parameter=math.sqrt(3.0)))
    result = find_centers(S, 0.1)
    assert not result.verdict
    assert result.verdict.diagnostic.test is TestName.COVARIANCE
    assert result.verdict.diagnostic.stage == "covariance check"
    assert result.candidates == []


def test_find_centers_rejects_shifted_marginal(make_dataset):
    S = make_dataset(n=50_000, seed=6)
    shifted = LabeledDataset(x=S.x + 0.3 * basis_vector(5), y=S.y)
    result = find_centers(shifted, 0.1)
    assert not result.verdict
    assert result.verdict.diagnostic.test is TestName.MEAN


def test_all_positive_labels_take_the_chow_path(constant_label_dataset):
    result = find_centers(constant_label_dataset(1), 0.1)
    assert result.verdict
    assert result.imbalanced
    assert all(c.source is CandidateSource.CHOW_PATH for c in result.candidates)
    assert result.tails == []


def test_independent_labels_give_origin_only():
    gen = np.random.default_rng(7)
    S = LabeledDataset(x=gen.standard_normal((50_000, 5)), y=np.where(gen.random(50_000) < 0.5, 1, -1))
    assert np.linalg.norm(chow_vector(S)) <= 4 * math.sqrt(5 / 50_000)
    result = chow_center_search(S, 0.1)
    assert result.verdict
    assert len(result.candidates) == 1
    assert result.candidates[0].norm == 0.0


def test_chow_vector_identity(make_dataset):
    S = make_dataset(n=200_000, seed=8, t=1.0)
    assert np.linalg.norm(chow_vector(S)) == pytest.approx(oracles.chow_norm(1.0), abs=0.01)
    assert oracles.chow_norm(0.0) == pytest.approx(math.sqrt(2 / math.pi))


def test_chow_grid_length(make_dataset):
    eps = 0.2
    S = make_dataset(n=50_000, seed=9)
    result = chow_center_search(S, eps)
    assert len(result.candidates) == math.ceil(CHOW_GRID_REACH / eps**2) + 1
    step = result.candidates[1].point - result.candidates[0].point
    assert np.linalg.norm(step) == pytest.approx(eps**2)


def test_chow_path_rejects_uniform_cube(make_dataset):
    S = make_dataset(d=3, n=100_000, seed=10, marginal=MarginalKind.parse("uniform_cube"))
    result = chow_center_search(S, 0.1)
    assert not result.verdict
    assert result.verdict.diagnostic.test is TestName.MOMENTS


def test_center_quality_known_values():
    truth = Halfspace(v=basis_vector(3), t=-2.5)
    on_plane = CenterCandidate(point=2.5 * basis_vector(3), source=CandidateSource.CHOW_PATH, grid_index=0)
    alpha, beta = center_quality(on_plane, truth)
    assert alpha == 0.0
    assert beta == pytest.approx(0.00621, abs=1e-5)

    origin = CenterCandidate(point=np.zeros(3), source=CandidateSource.CHOW_PATH, grid_index=0)
    assert center_quality(origin, truth) == (2.5, 0.5)
    assert gaussian_tail(2.5) == pytest.approx(0.0062096653, rel=1e-8)


@pytest.mark.parametrize("t, side", [(1.5, -1.0), (-1.5, 1.0)])
def test_chow_ray_heads_for_the_minority_label(make_dataset, t, side):
    S = make_dataset(n=100_000, seed=11, t=t)
    result = chow_center_search(S, 0.2)
    far = result.candidates[-1].point
    assert np.sign(far[0]) == side
    # the ray crosses the boundary x1 = -t
    assert abs(far[0]) >= abs(t)
    assert minority_label(S) == int(side)


def _tail_flip(make_dataset, t_star, opt, n, seed, d=5, v=None):
    # the boundary of (v, -t*) sits at v.x = t*
    noise = NoiseProfile(budget=opt, strategy=NoiseStrategy.TAIL_FLIP)
    return make_dataset(d=d, n=n, seed=seed, t=-t_star, noise=noise, v=v)


def _has_good_center(result, S, truth, eps):
    minority = minority_mass(S)
    floor = 0.05 * minority / math.log(1.0 / minority)
    qualities = [center_quality(c, truth) for c in result.candidates]
    return any(alpha <= eps**2 + 0.01 and beta >= floor for alpha, beta in qualities)


# heavy flips at t* = 2.5 leave about 0.12% of the minority label; see the constant fallback test
CONTAINMENT_CELLS = [(1.0, 0.0), (1.0, 0.005), (2.0, 0.0), (2.0, 0.005), (2.5, 0.0)]


@pytest.mark.parametrize("t_star, opt", CONTAINMENT_CELLS)
def test_candidate_list_contains_good_center(make_dataset, t_star, opt):
    eps = 0.1
    S = _tail_flip(make_dataset, t_star, opt, 300_000, seed=12)
    result = find_centers(S, eps)
    assert result.verdict
    assert _has_good_center(result, S, Halfspace(v=basis_vector(5), t=-t_star), eps)


@pytest.mark.slow
@pytest.mark.parametrize("t_star, opt", CONTAINMENT_CELLS)
def test_good_center_containment_at_desk_scale(make_dataset, t_star, opt):
    eps = 0.05
    truth = Halfspace(v=basis_vector(5), t=-t_star)
    hits = 0
    for trial in range(20):
        S = _tail_flip(make_dataset, t_star, opt, 1_000_000, seed=derive_seed(13, "containment", trial))
        result = find_centers(S, eps)
        if not result.verdict:
            continue
        for source in (CandidateSource.TAIL_MEAN_PLUS, CandidateSource.TAIL_MEAN_MINUS):
            assert sum(c.source is source for c in result.candidates) <= ray_cap(minority_mass(S), eps)
        hits += _has_good_center(result, S, truth, eps)
    assert hits >= 17


def test_far_threshold_chow_ray_clears_noise_floor(make_dataset):
    # 2 G(2.5) = 0.035 sits below eps and well above the sampling noise
    S = make_dataset(n=300_000, seed=14, t=-2.5)
    result = find_centers(S, 0.05)
    assert result.imbalanced
    assert len(result.candidates) > 1
    assert oracles.chow_norm(2.5) < 0.05
    far = result.candidates[-1].point
    assert far[0] > 2.5


@pytest.mark.slow
def test_find_centers_completeness_at_desk_scale(make_dataset):
    returned = 0
    for trial in range(20):
        S = _tail_flip(make_dataset, 1.0, 0.01 * (trial % 2), 1_000_000, seed=derive_seed(15, "completeness", trial))
        returned += bool(find_centers(S, 0.05).verdict)
    assert returned >= 18


@pytest.mark.parametrize("t_star", [1.0, 2.0])
def test_minority_tail_mean_keeps_gaussian_mass(make_dataset, t_star):
    for opt in (0.0, 0.005):
        S = _tail_flip(make_dataset, t_star, opt, 200_000, seed=16)
        minority = minority_mass(S)
        mu = tail_mean(S, minority_label(S)).tail_mean
        assert gaussian_tail(np.linalg.norm(mu)) >= 0.05 * minority / math.log(1.0 / minority)


@pytest.mark.slow
@pytest.mark.parametrize("t_star", [1.0, 2.0, 2.5])
def test_minority_tail_mean_keeps_gaussian_mass_at_desk_scale(make_dataset, t_star):
    for opt in (0.0, 0.005):
        S = _tail_flip(make_dataset, t_star, opt, 1_000_000, seed=17)
        minority = minority_mass(S)
        mu = tail_mean(S, minority_label(S)).tail_mean
        assert gaussian_tail(np.linalg.norm(mu)) >= 0.05 * minority / math.log(1.0 / minority)


def _angle(a, b):
    return math.acos(float(np.clip(normalize(a) @ normalize(b), -1.0, 1.0)))


@pytest.mark.parametrize("t", [0.0, -1.0])
def test_chow_direction_angle(make_dataset, t):
    v = normalize(derive_rng(18, "direction").standard_normal(10))
    S = make_dataset(d=10, n=200_000, seed=19, t=t, v=v)
    assert _angle(chow_vector(S), v) <= 0.05


@pytest.mark.slow
@pytest.mark.parametrize("t", [0.0, -1.0, -2.0])
def test_chow_direction_angle_at_desk_scale(make_dataset, t):
    v = normalize(derive_rng(20, "direction").standard_normal(10))
    S = make_dataset(d=10, n=1_000_000, seed=21, t=t, v=v)
    assert _angle(chow_vector(S), v) <= 0.05


def test_chow_floor_values(constant_label_dataset):
    S = constant_label_dataset(1, d=5, n=20_000)
    assert chow_floor(S, 0.1) == pytest.approx(3 * math.sqrt(5 / 20_000))
    assert chow_floor(S, 0.01) == 0.01
