import numpy as np
import pytest

from loewner._sampling import haar_unitary, hermitian_with_spectrum


def random_hermitian(rng, d, scale=1.0):
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (X + X.conj().T) / 2


def commuting_tuple(rng, d, boxes):
    """Operators sharing one Haar eigenbasis, with spectra drawn inside ``boxes``."""
    U = haar_unitary(d, rng)
    eigs = [rng.uniform(lo, hi, size=d) for lo, hi in boxes]
    return [hermitian_with_spectrum(U, e) for e in eigs], U, eigs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
