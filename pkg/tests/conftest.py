import numpy as np
import pytest

from salrate import synthetic


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_video():
    return synthetic.textured_sequence(64, 48, 3, seed=7)


@pytest.fixture(scope="session")
def small_saliency():
    return synthetic.two_lobe_saliency(64, 48, 3)
