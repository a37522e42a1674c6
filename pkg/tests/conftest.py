import numpy as np
import pytest

from degentrace.geometry import HomogeneousPotential


@pytest.fixture(scope="session")
def quartic_sextic():
    """V = -x^4 + x^6, the reference one-dimensional potential."""
    return HomogeneousPotential.from_table([((4,), -1.0), ((6,), 1.0)], n=1, k=2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
