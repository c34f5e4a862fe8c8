import numpy as np
import pytest

from nlqsim import nlcompiler, statevec


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_register(rng, n):
    a = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return statevec.init_from_amplitudes(a)


def random_coupling(rng, n, scale=1.0):
    m = rng.normal(size=(2**n, 2**n)) * scale
    return nlcompiler.CouplingMatrix((m + m.T) / 2.0)
