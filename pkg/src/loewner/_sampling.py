"""Random Hermitian matrices with prescribed spectral boxes."""
from __future__ import annotations

import numpy as np


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary from the QR factorization of a complex Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def hermitian_with_spectrum(U: np.ndarray, eigenvalues: np.ndarray) -> np.ndarray:
    A = (U * eigenvalues) @ U.conj().T
    return (A + A.conj().T) / 2


def random_hermitian(d: int, lo: float, hi: float, rng: np.random.Generator,
                     U: np.ndarray | None = None) -> np.ndarray:
    """``U diag(lambda) U*`` with eigenvalues uniform in ``[lo, hi]``."""
    if U is None:
        U = haar_unitary(d, rng)
    return hermitian_with_spectrum(U, rng.uniform(lo, hi, d))
