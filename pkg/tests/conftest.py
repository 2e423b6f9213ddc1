import numpy as np
import pytest

from lfis import nn


@pytest.fixture(autouse=True)
def single_thread():
    """Every test starts and ends in single-threaded evaluation mode."""
    nn.set_num_threads(1)
    yield
    nn.set_num_threads(1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
