import numpy as np
import pytest

from garnetspin.crystal import FieldSpec


@pytest.fixture
def field110():
    return FieldSpec.along(310.0, [1, 1, 0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_units(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1)[:, None]
