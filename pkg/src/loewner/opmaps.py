"""Kantorovich function, polynomial isometry maps and Kantorovich-corrected bound operators."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .envelope import EnvelopePair, SigmoidCombination, eval_operator
from .errors import PreconditionError
from .optimize import OptimizeConfig, box_optimize
from .spectral import Box, as_hermitian, eigh

__all__ = [
    "kantorovich",
    "PolyMap",
    "SpectrumRange",
    "apply_polymap",
    "build_poly_bound_operator",
    "scalar_poly_range",
    "weighted_range_sum",
]

ISOMETRY_TOL = 1e-9
SIDES = ("upper", "lower")


def kantorovich(m: float, M: float, r: float) -> float:
    """Kantorovich function ``K(m, M, r)`` for ``0 < m <= M``.

    Equals 1 for ``r`` in {0, 1} and on a degenerate interval. Computed from
    the ratio ``h = M / m`` only, which makes it exactly scale invariant up to
    the rounding of ``h``.
    """
    m, M, r = float(m), float(M), float(r)
    if not m > 0:
        raise ValueError(f"Kantorovich function needs m > 0, got m={m}")
    if M < m:
        raise ValueError(f"Kantorovich function needs M >= m, got [{m}, {M}]")
    if not np.isfinite(r):
        raise ValueError("exponent must be finite")
    if r in (0.0, 1.0) or M - m <= 1e-12 * max(1.0, M):
        return 1.0
    h = M / m
    hr = h**r
    first = (hr - h) / ((r - 1.0) * (h - 1.0))
    bracket = (r - 1.0) * (hr - 1.0) / (r * (hr - h))
    return float(first * bracket**r)


@dataclass(frozen=True, eq=False)
class PolyMap:
    """``Phi(X) = V* (sum_i a_i X^i) V`` with an isometry ``V`` of shape ``(d, k)``."""

    coeffs: Mapping[int, float]
    isometry: np.ndarray
    allow_negative_exponents: bool = False

    def __post_init__(self) -> None:
        coeffs: dict[int, float] = {}
        for e, a in dict(self.coeffs).items():
            if isinstance(e, str):
                e = int(e)
            if int(e) != e:
                raise ValueError(f"exponent {e!r} is not an integer")
            a = float(a)
            if not np.isfinite(a):
                raise ValueError(f"coefficient of exponent {e} is not finite")
            if a != 0.0:
                coeffs[int(e)] = coeffs.get(int(e), 0.0) + a
        if any(e < 0 for e in coeffs) and not self.allow_negative_exponents:
            raise ValueError("negative exponents require allow_negative_exponents=True")
        V = np.asarray(self.isometry)
        if V.ndim != 2 or V.shape[0] < V.shape[1] or V.shape[1] < 1:
            raise ValueError(f"isometry must be d x k with d >= k >= 1, got {V.shape}")
        err = float(np.linalg.norm(V.conj().T @ V - np.eye(V.shape[1])))
        if err > ISOMETRY_TOL:
            raise ValueError(f"V is not an isometry: ||V*V - I||_F = {err:.3e}")
        V = V.copy()
        V.setflags(write=False)
        object.__setattr__(self, "coeffs", dict(sorted(coeffs.items())))
        object.__setattr__(self, "isometry", V)

    @classmethod
    def identity(cls, d: int) -> "PolyMap":
        return cls({1: 1.0}, np.eye(d))

    @property
    def dim_in(self) -> int:
        return self.isometry.shape[0]

    @property
    def dim_out(self) -> int:
        return self.isometry.shape[1]

    @property
    def positive_set(self) -> tuple[int, ...]:
        """Exponents with nonnegative coefficient."""
        return tuple(e for e, a in self.coeffs.items() if a >= 0)

    @property
    def negative_set(self) -> tuple[int, ...]:
        """Exponents with negative coefficient."""
        return tuple(e for e, a in self.coeffs.items() if a < 0)

    @property
    def is_normalized(self) -> bool:
        return abs(sum(self.coeffs.values()) - 1.0) <= 1e-12

    @property
    def is_linear(self) -> bool:
        return set(self.coeffs) <= {1} and self.is_normalized

    def coefficient_key(self) -> tuple[tuple[int, float], ...]:
        return tuple(self.coeffs.items())

    def to_dict(self) -> dict[str, Any]:
        V = self.isometry
        return {
            "coeffs": {str(e): a for e, a in self.coeffs.items()},
            "isometry": [
                [[float(np.real(z)), float(np.imag(z))] for z in row] for row in V
            ],
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any], allow_negative_exponents: bool = False) -> "PolyMap":
        rows = doc["isometry"]
        V = np.array([[complex(re, im) for re, im in row] for row in rows])
        if np.all(V.imag == 0):
            V = V.real
        return cls({int(e): float(a) for e, a in doc["coeffs"].items()}, V,
                   allow_negative_exponents)


@dataclass(frozen=True)
class SpectrumRange:
    """Closed interval estimate ``[lo, hi]`` of an operator's eigenvalues."""

    lo: float
    hi: float
    padding: float = 0.0
    grid_estimated: bool = True
    provenance: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not self.lo <= self.hi:
            raise ValueError(f"invalid range [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, values, tol: float = 0.0) -> bool:
        v = np.asarray(values, dtype=float)
        return bool(np.all(v >= self.lo - tol) and np.all(v <= self.hi + tol))

    def to_dict(self) -> dict[str, Any]:
        return {"lo": self.lo, "hi": self.hi, "padding": self.padding,
                "grid_estimated": self.grid_estimated}


def weighted_range_sum(ranges, weights) -> SpectrumRange:
    """Weighted Minkowski sum; contains the spectrum of the matching weighted operator sum."""
    lo = float(sum(w * r.lo for r, w in zip(ranges, weights)))
    hi = float(sum(w * r.hi for r, w in zip(ranges, weights)))
    pad = float(sum(w * r.padding for r, w in zip(ranges, weights)))
    return SpectrumRange(lo, hi, pad, any(r.grid_estimated for r in ranges))


def apply_polymap(phi: PolyMap, X: np.ndarray) -> np.ndarray:
    """``V* (sum_i a_i X^i) V`` by spectral calculus."""
    X = as_hermitian(X)
    if X.shape[0] != phi.dim_in:
        raise ValueError(f"map expects dimension {phi.dim_in}, got {X.shape[0]}")
    dec = eigh(X)
    lam = dec.eigenvalues
    if any(e < 0 for e in phi.coeffs):
        pd_tol = 1e-10 * float(np.max(np.abs(lam)))
        if lam[0] <= pd_tol:
            raise PreconditionError(
                f"negative exponent needs a positive definite input; min eigenvalue {lam[0]:.6g}"
            )
    vals = np.zeros_like(lam)
    for e, a in phi.coeffs.items():
        vals = vals + a * lam**e
    inner = (dec.basis * vals) @ dec.basis.conj().T
    V = phi.isometry
    out = V.conj().T @ inner @ V
    return (out + out.conj().T) / 2


def _check_side(side: str) -> str:
    if side not in SIDES:
        raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")
    return side


def _require_plain_exponents(phi: PolyMap) -> None:
    neg = [e for e in phi.coeffs if e < 0]
    if neg:
        raise PreconditionError(f"bound operators support nonnegative exponents only, got {neg}")


def _power_with_k(dec, e: int, kfactor: float) -> np.ndarray:
    vals = kfactor * dec.eigenvalues**e
    return (dec.basis * vals) @ dec.basis.conj().T


def build_poly_bound_operator(
    side: str,
    phi: PolyMap,
    pair: EnvelopePair,
    T,
    psd_tol: float = 1e-12,
) -> np.ndarray:
    """Kantorovich-corrected polynomial bound on ``Phi(f(T))``.

    Upper side: nonnegative coefficients use ``K(spec Psi_U, i) Psi_U(T)^i``
    and negative ones ``K(spec Psi_L, i)^-1 Psi_L(T)^i``; the lower side swaps
    the roles. Exponents 0 and 1 carry no correction factor.
    """
    _check_side(side)
    _require_plain_exponents(phi)
    if isinstance(T, np.ndarray) and T.ndim == 2:
        T = [T]
    psi_u = eval_operator(pair.upper, T)
    psi_l = eval_operator(pair.lower, T)
    if psi_u.shape[0] != phi.dim_in:
        raise ValueError(f"map expects dimension {phi.dim_in}, got {psi_u.shape[0]}")
    dec_u, dec_l = eigh(psi_u), eigh(psi_l)
    high = any(e >= 2 for e in phi.coeffs)
    if high:
        scale = max(1.0, float(np.max(np.abs(dec_l.eigenvalues))))
        if dec_l.eigenvalues[0] < -psd_tol * scale:
            raise PreconditionError(
                f"Psi_L(T) must be positive semidefinite; min eigenvalue {dec_l.eigenvalues[0]:.6g}"
            )

    def kf(dec, name: str, e: int) -> float:
        if e < 2:
            return 1.0
        lo, hi = dec.eigenvalues[0], dec.eigenvalues[-1]
        if not lo > 0:
            raise PreconditionError(
                f"Kantorovich factor needs {name}(T) positive definite; min eigenvalue {lo:.6g}"
            )
        return kantorovich(lo, hi, e)

    d = phi.dim_in
    acc = np.zeros((d, d), dtype=complex if np.iscomplexobj(psi_u) else float)
    for e, a in phi.coeffs.items():
        if e == 0:
            acc = acc + a * np.eye(d)
            continue
        use_upper = (a >= 0) == (side == "upper")
        if use_upper:
            acc = acc + a * _power_with_k(dec_u, e, kf(dec_u, "Psi_U", e))
        else:
            acc = acc + a * _power_with_k(dec_l, e, 1.0 / kf(dec_l, "Psi_L", e))
    V = phi.isometry
    out = V.conj().T @ acc @ V
    return (out + out.conj().T) / 2


def _psi_callable(psi: SigmoidCombination, n: int):
    def h(*xs):
        arrs = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in xs))
        pts = np.stack([a.ravel() for a in arrs], axis=1)
        return psi.evaluate(pts).reshape(arrs[0].shape)
    return h


def scalar_poly_range(
    side: str,
    phi: PolyMap,
    pair: EnvelopePair,
    box: Box,
    grid: int = 24,
    *,
    conservative: bool = True,
    range_pad: float = 1e-6,
    cfg: OptimizeConfig | None = None,
) -> SpectrumRange:
    """Grid-estimated eigenvalue range of the bound operator over ``box``.

    ``conservative=True`` lets each Kantorovich factor vary between 1 and its
    box-global value, which covers every operator whose envelope spectrum lies
    in the box. ``conservative=False`` uses the box-global factors only.
    """
    _check_side(side)
    _require_plain_exponents(phi)
    if grid < 2:
        raise ValueError("grid must be at least 2")
    if box.n != pair.n_vars:
        raise ValueError(f"box has {box.n} axes, envelopes have {pair.n_vars}")
    cfg = cfg or OptimizeConfig(grid_per_axis=grid, max_grid_points=2**15, n_starts=3,
                                 max_sweeps=4, xtol=1e-10)
    pu = _psi_callable(pair.upper, box.n)
    pl = _psi_callable(pair.lower, box.n)
    exps = [e for e in phi.coeffs if e >= 2]
    ku: dict[int, float] = {}
    kl: dict[int, float] = {}
    if exps:
        u_lo = box_optimize(pu, box, "min", cfg).value
        u_hi = box_optimize(pu, box, "max", cfg).value
        l_lo = box_optimize(pl, box, "min", cfg).value
        l_hi = box_optimize(pl, box, "max", cfg).value
        if not l_lo > 0:
            raise PreconditionError(f"scalar Psi_L not positive on the box grid: min {l_lo:.6g}")
        for e in exps:
            ku[e] = kantorovich(u_lo, max(u_lo, u_hi), e)
            kl[e] = kantorovich(l_lo, max(l_lo, l_hi), e)

    def build(extreme: str):
        # Psi_U >= Psi_L > 0 on the box, so each term is monotone in its factor
        terms = []
        for e, a in phi.coeffs.items():
            use_upper = (a >= 0) == (side == "upper")
            if e < 2:
                k = 1.0
            else:
                kmin, kmax = (1.0, ku[e]) if use_upper else (1.0 / kl[e], 1.0)
                if not conservative:
                    k = ku[e] if use_upper else 1.0 / kl[e]
                else:
                    k = kmax if (a >= 0) == (extreme == "hi") else kmin
            terms.append((e, a * k, use_upper))

        def poly(*xs):
            u = pu(*xs)
            low = pl(*xs)
            out = np.zeros(np.shape(u))
            for e, ak, up in terms:
                out = out + ak * (u if up else low) ** e
            return out
        return poly

    lo = box_optimize(build("lo"), box, "min", cfg)
    hi = box_optimize(build("hi"), box, "max", cfg)
    lo_v, hi_v = lo.value, max(lo.value, hi.value)
    pad = range_pad * (hi_v - lo_v) + 1e-12 * max(1.0, abs(lo_v), abs(hi_v))
    return SpectrumRange(
        lo_v - pad, hi_v + pad, pad, True,
        {"grid_per_axis": lo.provenance["grid_per_axis"], "conservative": conservative,
         "argmin": lo.argpoint, "argmax": hi.argpoint},
    )
