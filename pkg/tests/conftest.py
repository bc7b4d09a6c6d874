import numpy as np
import pytest

from lytnet.model import build_default_spec, random_weights

TOY_SHAPE = (3, 24, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def toy_spec():
    return build_default_spec(input_shape=TOY_SHAPE)


@pytest.fixture(scope="session")
def toy_weights(toy_spec):
    return random_weights(toy_spec, seed=7)


@pytest.fixture(scope="session")
def default_spec():
    return build_default_spec()


@pytest.fixture(scope="session")
def default_weights(default_spec):
    return random_weights(default_spec, seed=0)
