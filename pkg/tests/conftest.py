import numpy as np
import pytest

from minplus_filter.minplus import MinQuadFunction
from minplus_filter.quadform import QuadraticForm


def spd(rng, n, floor=0.5):
    M = rng.normal(size=(n, n))
    return M @ M.T + floor * np.eye(n)


def random_collection(rng, K, n, spread=3.0):
    """``K`` strictly convex forms with scattered troughs."""
    mats = []
    for _ in range(K):
        N = spd(rng, n)
        c = rng.uniform(-spread, spread, size=n)
        mats.append(QuadraticForm.from_blocks(N, -N @ c, c @ N @ c + rng.uniform(0, 2)).mat)
    return MinQuadFunction(np.stack(mats))


def scalar_form(a, b, c):
    """Augmented matrix of ``x -> a x^2 + b x + c``."""
    return np.array([[2 * a, b], [b, 2 * c]], dtype=float)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
