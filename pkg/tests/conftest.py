import math

import numpy as np
import pytest

THETA = 3 * math.pi / 4


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_logical(rng, k=4):
    v = rng.normal(size=k) + 1j * rng.normal(size=k)
    return v / np.linalg.norm(v)
