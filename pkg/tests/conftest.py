import numpy as np
import pytest

from shiftsolve.systems import random_stable_system


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_system(n, m, p, seed):
    """Seeded stable test triple."""
    return random_stable_system(n, m, p, seed)


def probe_shifts(rng, count, scale=1.0):
    """Complex probe points kept away from the real axis (and hence from
    the spectrum of a real stable matrix's dominant real eigenvalues)."""
    re = rng.uniform(-0.5, 1.5, count) * scale
    im = rng.uniform(0.4, 2.5, count) * scale * np.where(rng.uniform(size=count) < 0.5, -1, 1)
    return re + 1j * im
