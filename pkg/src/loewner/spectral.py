"""Dense Hermitian linear algebra: spectral calculus and Loewner-order tests."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from ._numeric import call_on_columns, frobenius
from .errors import DomainError, NonCommutingError, NonHermitianError

HERM_TOL = 1e-9
ORTHO_TOL = 1e-9
RECON_TOL = 1e-9
COMMUTE_TOL = 1e-8

__all__ = [
    "Box",
    "SpectralDecomposition",
    "as_hermitian",
    "eigh",
    "apply_scalar_function",
    "sigmoid",
    "sigmoid_of_operator",
    "loewner_leq",
    "ky_fan_norm",
    "joint_diagonalize",
    "multivariate_operator_function",
    "commutator_norm",
]


@dataclass(frozen=True)
class Box:
    """Cartesian product of closed intervals ``[m_i, M_i]``."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        ivs = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        if not ivs:
            raise ValueError("box needs at least one interval")
        for i, (lo, hi) in enumerate(ivs):
            if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
                raise ValueError(f"axis {i}: need finite m < M, got [{lo}, {hi}]")
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def cube(cls, lo: float, hi: float, n: int) -> "Box":
        return cls(((lo, hi),) * n)

    @property
    def n(self) -> int:
        return len(self.intervals)

    @property
    def lows(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.intervals])

    @property
    def highs(self) -> np.ndarray:
        return np.array([hi for _, hi in self.intervals])

    def grid(self, per_axis: int) -> np.ndarray:
        """Uniform grid including corners, shape ``(per_axis**n, n)``."""
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in self.intervals]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    basis: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.basis * self.eigenvalues) @ self.basis.conj().T


def as_hermitian(H: np.ndarray, tol: float = HERM_TOL) -> np.ndarray:
    """Validate ``H`` as Hermitian and return its exact symmetrization."""
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise ValueError("matrix has non-finite entries")
    if not np.iscomplexobj(H):
        H = H.astype(float)
    asym = frobenius(H - H.conj().T)
    if asym > tol * max(1.0, frobenius(H)):
        raise NonHermitianError(f"matrix is not Hermitian: ||H - H*||_F = {asym:.3e}")
    return (H + H.conj().T) / 2


def eigh(H: np.ndarray, herm_tol: float = HERM_TOL) -> SpectralDecomposition:
    """Eigendecomposition with ascending eigenvalues."""
    w, q = np.linalg.eigh(as_hermitian(H, herm_tol))
    return SpectralDecomposition(w, q)


def _rebuild(basis: np.ndarray, values: np.ndarray) -> np.ndarray:
    out = (basis * values) @ basis.conj().T
    return (out + out.conj().T) / 2


def apply_scalar_function(H: np.ndarray, phi: Callable[[float], float]) -> np.ndarray:
    """Spectral calculus ``phi(H) = Q diag(phi(lambda)) Q*``."""
    dec = eigh(H)
    vals = call_on_columns(phi, dec.eigenvalues)
    bad = ~np.isfinite(vals)
    if bad.any():
        lam = dec.eigenvalues[np.argmax(bad)]
        raise DomainError(f"function is undefined or non-finite at eigenvalue {lam!r}")
    return _rebuild(dec.basis, vals)


def sigmoid(t):
    """Logistic function ``1 / (1 + exp(-t))``."""
    return expit(t)


def sigmoid_of_operator(Y: np.ndarray) -> np.ndarray:
    return apply_scalar_function(Y, expit)


def loewner_leq(A: np.ndarray, B: np.ndarray, tol: float = 1e-9) -> tuple[bool, float]:
    """Test ``A <= B``; the witness is the smallest eigenvalue of ``B - A``."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    D = B - A
    witness = float(np.linalg.eigvalsh((D + D.conj().T) / 2)[0])
    return witness >= -tol, witness


def ky_fan_norm(A: np.ndarray, ell: int) -> float:
    """Sum of the ``ell`` largest singular values of a Hermitian matrix."""
    A = as_hermitian(A)
    if isinstance(ell, bool) or int(ell) != ell:
        raise ValueError(f"Ky Fan order must be an integer, got {ell!r}")
    ell = int(ell)
    d = A.shape[0]
    if not 1 <= ell <= d:
        raise ValueError(f"Ky Fan order {ell} outside [1, {d}]")
    s = np.sort(np.abs(np.linalg.eigvalsh(A)))[::-1]
    return float(np.sum(s[:ell]))


def commutator_norm(A: np.ndarray, B: np.ndarray) -> float:
    return frobenius(A @ B - B @ A)


def _check_tuple(T: Sequence[np.ndarray]) -> list[np.ndarray]:
    ops = [as_hermitian(A) for A in T]
    if not ops:
        raise ValueError("operator tuple is empty")
    d = ops[0].shape
    for i, A in enumerate(ops):
        if A.shape != d:
            raise ValueError(f"operator {i} has shape {A.shape}, expected {d}")
    return ops


def joint_diagonalize(
    T: Sequence[np.ndarray], tol: float = COMMUTE_TOL
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Shared eigenbasis of a commuting tuple.

    A generic real combination of the operators is diagonalized and every
    operator is then checked to be diagonal in that basis.
    """
    ops = _check_tuple(T)
    scale = max(1.0, max(frobenius(A) for A in ops))
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            c = commutator_norm(ops[i], ops[j])
            if c > tol * scale**2:
                raise NonCommutingError(
                    f"non-commuting tuple: ||[A_{i}, A_{j}]||_F = {c:.6g}"
                )
    if len(ops) == 1:
        dec = eigh(ops[0])
        return dec.basis, [dec.eigenvalues]
    rng = np.random.default_rng(20240917)
    worst = np.inf
    for _ in range(3):
        coef = rng.uniform(0.5, 1.5, len(ops)) * rng.choice([-1.0, 1.0], len(ops))
        Y = sum(c * A for c, A in zip(coef, ops))
        _, q = np.linalg.eigh(Y)
        eigs = []
        worst = 0.0
        for A in ops:
            D = q.conj().T @ A @ q
            off = frobenius(D - np.diag(np.diag(D)))
            worst = max(worst, off / max(1.0, frobenius(A)))
            eigs.append(np.real(np.diag(D)).copy())
        if worst <= 1e-7:
            return q, eigs
    raise NonCommutingError(
        f"joint diagonalization failed after 3 attempts (residual {worst:.3e})"
    )


def multivariate_operator_function(
    f: Callable[..., float], T: Sequence[np.ndarray]
) -> np.ndarray:
    """Joint spectral calculus ``f(A_1, ..., A_n)`` for a commuting tuple."""
    q, eigs = joint_diagonalize(T)
    vals = call_on_columns(f, *eigs)
    bad = ~np.isfinite(vals)
    if bad.any():
        k = int(np.argmax(bad))
        point = tuple(float(e[k]) for e in eigs)
        raise DomainError(f"function is undefined or non-finite at joint eigenvalue {point}")
    return _rebuild(q, vals)
