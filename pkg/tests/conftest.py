import numpy as np
import pytest

from crowdtypes import ModelParams


@pytest.fixture
def params():
    return ModelParams(d=3, p=0.9, q=0.6)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
