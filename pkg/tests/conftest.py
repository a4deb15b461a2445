import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture(scope="session")
def eta_hat():
    from nspolar.construct import cached_eta

    return cached_eta()
