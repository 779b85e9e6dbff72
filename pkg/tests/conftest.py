import numpy as np
import pytest

from relaycap import linalg


@pytest.fixture(params=linalg.available_backends())
def backend(request):
    previous = linalg.set_backend(request.param)
    yield request.param
    linalg.set_backend(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_complex(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_hermitian(rng, n):
    a = random_complex(rng, n, n)
    return 0.5 * (a + a.conj().T)


def random_pd(rng, n, shift=1.0):
    a = random_complex(rng, n, n)
    return a @ a.conj().T / n + shift * np.eye(n)
