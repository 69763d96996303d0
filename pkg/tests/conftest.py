import numpy as np
import pytest

from ergo_moments.dynamics import build_ulam


@pytest.fixture(scope="session")
def ulam_025():
    return build_ulam(0.25, 4096)


@pytest.fixture(scope="session")
def ulam_075():
    return build_ulam(0.75, 4096)


@pytest.fixture(scope="session")
def ulam_small():
    return build_ulam(0.5, 512)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
