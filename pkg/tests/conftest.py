import numpy as np
import pytest

from hybrid_ncl.core import PredictionMatrix


def random_matrix(rng, n=None, m=None, spread=1.0) -> PredictionMatrix:
    n = n or int(rng.integers(5, 51))
    m = m or int(rng.integers(2, 11))
    y = rng.normal(size=n) * 3 + 10
    F = y[:, None] + rng.normal(size=(n, m)) * spread * rng.uniform(0.2, 2.0, size=m)
    return PredictionMatrix(F, y)


def random_simplex(rng, m):
    return rng.dirichlet(np.ones(m))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
