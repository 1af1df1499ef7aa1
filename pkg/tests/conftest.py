import numpy as np
import pytest

from blindrb.cliffords import clifford_group


@pytest.fixture(scope="session")
def group():
    return clifford_group()


@pytest.fixture()
def rng():
    return np.random.default_rng(20260810)
