import numpy as np
import pytest

from halfspace_tl.app.schemas.halfspace import Halfspace, LabeledDataset, MarginalKind, NoiseProfile
from halfspace_tl.app.services.core import basis_vector, derive_seed
from halfspace_tl.app.services.synth import generate


@pytest.fixture
def make_dataset():
    """generate() with e1-aligned truth and no corruption unless told otherwise."""

    def _make(
        d: int = 5,
        n: int = 10_000,
        seed: int = 0,
        t: float = 0.0,
        marginal: MarginalKind | None = None,
        noise: NoiseProfile | None = None,
        v=None,
    ) -> LabeledDataset:
        direction = basis_vector(d) if v is None else v
        return generate(d, n, marginal or MarginalKind(), Halfspace(v=direction, t=t), noise or NoiseProfile(), seed)

    return _make


@pytest.fixture
def rng():
    return np.random.default_rng(derive_seed(0, "tests"))


@pytest.fixture
def constant_label_dataset():
    def _make(label: int, d: int = 5, n: int = 20_000, seed: int = 3) -> LabeledDataset:
        x = np.random.default_rng(seed).standard_normal((n, d))
        return LabeledDataset(x=x, y=np.full(n, label, dtype=np.int8))

    return _make
