"""
Shared fixtures: the four-point TINY label setup and small generated worlds.
"""

import numpy as np
import pytest

from src.core.config import Settings, Tolerances
from src.demo.world_generator import ScenarioConfig, gen_block_world
from src.models.label_model import PosteriorMatrix, SemiSupervisedLayout, make_noise_model, one_hot


@pytest.fixture
def tiny_y() -> PosteriorMatrix:
    """Deterministic labels (1, 1, 2, 2) as 0-based classes, r = 2."""
    y = one_hot([0, 0, 1, 1], 2)
    return PosteriorMatrix(eta=y.eta, class_balanced=True)


@pytest.fixture
def tiny_noise():
    return make_noise_model(2, 0.25)


@pytest.fixture
def tiny_layout() -> SemiSupervisedLayout:
    return SemiSupervisedLayout(n_L=4, n_U=2)


@pytest.fixture
def scenario() -> ScenarioConfig:
    return ScenarioConfig(seed=7, r=2, naturals_per_class=2, augs_per_natural=2,
                          intra_class_overlap=0.2, inter_class_overlap=0.05, labeled_fraction=0.5)


@pytest.fixture
def world(scenario):
    return gen_block_world(scenario)


@pytest.fixture
def jacobi_settings() -> Settings:
    return Settings(eigen_method="jacobi", tolerances=Tolerances())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_symmetric(rng):
    """Factory for random symmetric n x n matrices."""
    def make(n: int) -> np.ndarray:
        a = rng.normal(size=(n, n))
        return 0.5 * (a + a.T)
    return make
