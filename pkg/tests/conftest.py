import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_orthonormal_pair(rng, n=None):
    shape = (4,) if n is None else (n, 4)
    a = rng.normal(size=shape)
    a /= np.linalg.norm(a, axis=-1, keepdims=True)
    b = rng.normal(size=shape)
    b -= np.sum(a * b, axis=-1, keepdims=True) * a
    b /= np.linalg.norm(b, axis=-1, keepdims=True)
    return a, b


_CACHE = {}


def built(spec):
    """Surfaces are immutable and cache their frames, so tests share them."""
    from gaussarea.gallery import from_spec

    if spec not in _CACHE:
        _CACHE[spec] = from_spec(spec)
    return _CACHE[spec]


@pytest.fixture(scope="session")
def glued1():
    return built("handles:g=1:h=0.01")


@pytest.fixture(scope="session")
def glued2():
    return built("handles:g=2:h=0.01")
