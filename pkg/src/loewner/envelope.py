"""One-sided sigmoid envelopes and linear (chord) envelopes."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from ._numeric import call_on_columns
from .errors import FitError
from .spectral import Box, apply_scalar_function, as_hermitian, sigmoid

# sigma(SATURATION) == 1.0 exactly in double precision
SATURATION = 50.0

__all__ = [
    "SATURATION",
    "SigmoidCombination",
    "EnvelopePair",
    "FitConfig",
    "EnvelopeReport",
    "LinearEnvelope",
    "ChordCoefficients",
    "eval_scalar",
    "eval_operator",
    "fit_envelopes",
    "verify_envelope",
    "chord",
    "linear_envelope_verify",
]


@dataclass(frozen=True, eq=False)
class SigmoidCombination:
    """``Psi(x) = sum_i A_i sigma(<C_i, x> + B_i)``."""

    n_vars: int
    outer: np.ndarray
    inner: np.ndarray
    offset: np.ndarray

    def __post_init__(self) -> None:
        if self.n_vars < 1:
            raise ValueError("n_vars must be positive")
        outer = np.asarray(self.outer, dtype=float).reshape(-1)
        offset = np.asarray(self.offset, dtype=float).reshape(-1)
        inner = np.asarray(self.inner, dtype=float).reshape(outer.size, self.n_vars)
        if offset.size != outer.size:
            raise ValueError("outer and offset lengths differ")
        if not (np.all(np.isfinite(outer)) and np.all(np.isfinite(inner))
                and np.all(np.isfinite(offset))):
            raise ValueError("coefficients must be finite")
        for name, arr in (("outer", outer), ("inner", inner), ("offset", offset)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_terms(cls, n_vars: int, terms: Sequence[tuple[float, Sequence[float], float]]):
        """Build from ``(A, C, B)`` triples."""
        if not terms:
            return cls.zero(n_vars)
        A = [t[0] for t in terms]
        C = [list(t[1]) for t in terms]
        B = [t[2] for t in terms]
        for c in C:
            if len(c) != n_vars:
                raise ValueError(f"inner vector of length {len(c)}, expected {n_vars}")
        return cls(n_vars, np.array(A), np.array(C), np.array(B))

    @classmethod
    def zero(cls, n_vars: int) -> "SigmoidCombination":
        return cls(n_vars, np.zeros(0), np.zeros((0, n_vars)), np.zeros(0))

    @classmethod
    def constant(cls, n_vars: int, value: float) -> "SigmoidCombination":
        if value == 0.0:
            return cls.zero(n_vars)
        return cls.from_terms(n_vars, [(value, [0.0] * n_vars, SATURATION)])

    @property
    def n_terms(self) -> int:
        return self.outer.size

    def with_terms(self, other: "SigmoidCombination") -> "SigmoidCombination":
        """Concatenate the terms of two combinations."""
        if other.n_vars != self.n_vars:
            raise ValueError("n_vars mismatch")
        return SigmoidCombination(
            self.n_vars,
            np.concatenate([self.outer, other.outer]),
            np.vstack([self.inner, other.inner]),
            np.concatenate([self.offset, other.offset]),
        )

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Vectorized scalar evaluation on points of shape ``(P, n_vars)``."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.n_vars)
        if self.n_terms == 0:
            return np.zeros(pts.shape[0])
        out = np.zeros(pts.shape[0])
        # chunked to bound memory on large grids
        step = max(1, 2**22 // max(1, self.n_terms))
        for s in range(0, pts.shape[0], step):
            z = pts[s:s + step] @ self.inner.T + self.offset
            out[s:s + step] = sigmoid(z) @ self.outer
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_vars": self.n_vars,
            "terms": [
                {"A": float(a), "B": float(b), "C": [float(c) for c in row]}
                for a, row, b in zip(self.outer, self.inner, self.offset)
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "SigmoidCombination":
        n = int(doc["n_vars"])
        return cls.from_terms(n, [(t["A"], t["C"], t["B"]) for t in doc["terms"]])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SigmoidCombination":
        return cls.from_dict(json.loads(text))


def eval_scalar(psi: SigmoidCombination, x: Sequence[float] | float) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (psi.n_vars,):
        raise ValueError(f"point has {x.size} coordinates, expected {psi.n_vars}")
    return float(psi.evaluate(x[None, :])[0])


def eval_operator(psi: SigmoidCombination, T: Sequence[np.ndarray]) -> np.ndarray:
    """Operator form ``sum_i A_i sigma(sum_j C_ij X_j + B_i I)``.

    Well defined for any tuple of Hermitian operators, commuting or not.
    """
    if isinstance(T, np.ndarray) and T.ndim == 2:
        T = [T]
    ops = [as_hermitian(X) for X in T]
    if len(ops) != psi.n_vars:
        raise ValueError(f"tuple has {len(ops)} operators, expected {psi.n_vars}")
    d = ops[0].shape[0]
    if any(X.shape != (d, d) for X in ops):
        raise ValueError("operators in the tuple have different dimensions")
    dtype = complex if any(np.iscomplexobj(X) for X in ops) else float
    if psi.n_terms == 0:
        return np.zeros((d, d), dtype=dtype)
    if all(np.array_equal(X, ops[0]) for X in ops[1:]):
        # one shared eigenbasis: every term is a function of a single operator
        w, q = np.linalg.eigh(ops[0])
        z = np.outer(w, psi.inner.sum(axis=1)) + psi.offset
        vals = sigmoid(z) @ psi.outer
        out = (q * vals) @ q.conj().T
        return (out + out.conj().T) / 2
    out = np.zeros((d, d), dtype=dtype)
    eye = np.eye(d)
    for a, c, b in zip(psi.outer, psi.inner, psi.offset):
        if a == 0.0:
            continue
        Z = sum(cj * X for cj, X in zip(c, ops)) + b * eye
        out = out + a * apply_scalar_function(Z, sigmoid)
    return (out + out.conj().T) / 2


@dataclass(frozen=True)
class FitConfig:
    """Budget and randomness for :func:`fit_envelopes`."""

    grid_per_axis: int = 33
    max_grid_points: int = 2**16
    start_terms: int = 8
    max_terms: int = 1024
    ridge: float = 1e-10
    seed: int = 0
    scales: tuple[float, ...] = (1.0, 2.5, 6.0)
    target_fraction: float = 0.5
    max_verify_points: int = 2**18

    def fit_grid(self, n: int) -> int:
        per = self.grid_per_axis
        while per > 2 and per**n > self.max_grid_points:
            per -= 1
        return per

    def verify_grid(self, n: int) -> int:
        per = 2 * self.fit_grid(n) - 1
        while per > 2 and per**n > self.max_verify_points:
            per -= 1
        return per


@dataclass(frozen=True, eq=False)
class EnvelopePair:
    """``lower <= f <= upper`` with both gaps at most ``epsilon`` on a grid."""

    lower: SigmoidCombination
    upper: SigmoidCombination
    epsilon: float
    box: Box
    verification_grid: int
    achieved_gap_lower: float
    achieved_gap_upper: float
    f: Callable[..., float] | None = field(default=None, repr=False)
    schedule: tuple[int, ...] = ()
    gap_history: tuple[float, ...] = ()

    @property
    def n_vars(self) -> int:
        return self.box.n


@dataclass
class EnvelopeReport:
    max_upper_gap: float
    max_lower_gap: float
    worst_points: dict[str, tuple[float, ...]]
    violations: list[tuple[str, tuple[float, ...], float]]
    violation_count: int
    grid_per_axis: int

    @property
    def ok(self) -> bool:
        return self.violation_count == 0


def _features(rng: np.random.Generator, count: int, n: int, scales: Sequence[float]):
    """Random sigmoid ridge features in normalized coordinates ``u in [-1, 1]^n``."""
    s = np.asarray(scales, dtype=float)[rng.integers(0, len(scales), count)]
    w = rng.standard_normal((count, n)) * s[:, None]
    p = rng.uniform(-1.0, 1.0, (count, n))
    b = -np.einsum("ij,ij->i", w, p)
    return w, b


def _to_box_coords(w: np.ndarray, b: np.ndarray, box: Box):
    center = (box.lows + box.highs) / 2
    half = (box.highs - box.lows) / 2
    C = w / half
    B = b - C @ center
    return C, B


def fit_envelopes(
    f: Callable[..., float],
    box: Box,
    epsilon: float,
    budget: FitConfig | None = None,
) -> EnvelopePair:
    """Fit ``Psi_L <= f <= Psi_U`` with gaps at most ``epsilon`` on a grid.

    Random sigmoid features are fitted by ridge least squares, the term count
    doubles until the total gap is small enough, and the best candidate is then
    shifted by a saturated (constant) term so that each side is one-sided on
    the verification grid, which is twice as fine as the fitting grid.
    """
    cfg = budget or FitConfig()
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    n = box.n
    fit_pts = box.grid(cfg.fit_grid(n))
    ver_per = cfg.verify_grid(n)
    ver_pts = box.grid(ver_per)
    f_fit = call_on_columns(f, *fit_pts.T)
    f_ver = call_on_columns(f, *ver_pts.T)
    if not (np.all(np.isfinite(f_fit)) and np.all(np.isfinite(f_ver))):
        raise ValueError("f is not finite on the box")

    spread = float(f_ver.max() - f_ver.min())
    if spread == 0.0:
        c = SigmoidCombination.constant(n, float(f_ver[0]))
        return EnvelopePair(c, c, float(epsilon), box, ver_per, 0.0, 0.0, f, (), (0.0,))

    rng = np.random.default_rng(cfg.seed)
    center = (box.lows + box.highs) / 2
    half = (box.highs - box.lows) / 2
    u_fit = (fit_pts - center) / half
    u_ver = (ver_pts - center) / half

    w_all = np.zeros((0, n))
    b_all = np.zeros(0)
    schedule: list[int] = []
    history: list[float] = []
    best = None
    N = cfg.start_terms
    while N <= cfg.max_terms:
        w_new, b_new = _features(rng, N - w_all.shape[0], n, cfg.scales)
        w_all = np.vstack([w_all, w_new])
        b_all = np.concatenate([b_all, b_new])
        schedule.append(N)
        H = np.hstack([np.ones((u_fit.shape[0], 1)), sigmoid(u_fit @ w_all.T + b_all)])
        col = np.sqrt(np.sum(H * H, axis=0))
        Hs = H / col
        lam = np.sqrt(cfg.ridge)
        aug = np.vstack([Hs, lam * np.eye(Hs.shape[1])])
        rhs = np.concatenate([f_fit, np.zeros(Hs.shape[1])])
        coef = np.linalg.lstsq(aug, rhs, rcond=None)[0] / col
        resid = coef[0] + sigmoid(u_ver @ w_all.T + b_all) @ coef[1:] - f_ver
        d_plus = float(resid.max())
        d_minus = float(-resid.min())
        gap = d_plus + d_minus
        if best is None or gap < best[0]:
            best = (gap, d_plus, d_minus, coef.copy(), w_all.copy(), b_all.copy())
        history.append(best[0])
        if best[0] <= cfg.target_fraction * epsilon:
            break
        N *= 2

    gap, d_plus, d_minus, coef, w, b = best
    if gap > epsilon:
        raise FitError(
            f"best achieved gap {gap:.4g} exceeds epsilon {epsilon:.4g}",
            best_gap=gap,
            schedule=tuple(schedule),
        )
    margin = (epsilon - gap) / 4
    C, B = _to_box_coords(w, b, box)
    base = SigmoidCombination(
        n,
        np.concatenate([[coef[0]], coef[1:]]),
        np.vstack([np.zeros((1, n)), C]),
        np.concatenate([[SATURATION], B]),
    )
    upper = base.with_terms(SigmoidCombination.constant(n, d_minus + margin))
    lower = base.with_terms(SigmoidCombination.constant(n, -(d_plus + margin)))
    up_gap = float(np.max(upper.evaluate(ver_pts) - f_ver))
    lo_gap = float(np.max(f_ver - lower.evaluate(ver_pts)))
    return EnvelopePair(
        lower, upper, float(epsilon), box, ver_per, lo_gap, up_gap, f,
        tuple(schedule), tuple(history),
    )


def verify_envelope(
    f: Callable[..., float],
    pair: EnvelopePair,
    grid_per_axis: int,
    side_tol: float = 1e-9,
    gap_slack: float = 1e-9,
    max_listed: int = 100,
) -> EnvelopeReport:
    """Exhaustive check of one-sidedness and gap bounds on a uniform grid."""
    if grid_per_axis < 2:
        raise ValueError("grid_per_axis must be at least 2")
    pts = pair.box.grid(grid_per_axis)
    fv = call_on_columns(f, *pts.T)
    up = pair.upper.evaluate(pts) - fv
    lo = fv - pair.lower.evaluate(pts)
    violations: list[tuple[str, tuple[float, ...], float]] = []
    count = 0
    checks = (
        ("upper_below_f", up < -side_tol, up),
        ("lower_above_f", lo < -side_tol, lo),
        ("upper_gap", up > pair.epsilon + gap_slack, up),
        ("lower_gap", lo > pair.epsilon + gap_slack, lo),
    )
    for kind, mask, vals in checks:
        idx = np.flatnonzero(mask)
        count += idx.size
        for k in idx[: max(0, max_listed - len(violations))]:
            violations.append((kind, tuple(map(float, pts[k])), float(vals[k])))
    iu, il = int(np.argmax(up)), int(np.argmax(lo))
    return EnvelopeReport(
        max_upper_gap=float(up[iu]),
        max_lower_gap=float(lo[il]),
        worst_points={"upper": tuple(map(float, pts[iu])), "lower": tuple(map(float, pts[il]))},
        violations=violations,
        violation_count=count,
        grid_per_axis=grid_per_axis,
    )


@dataclass(frozen=True)
class ChordCoefficients:
    a: float
    b: float
    m: float
    M: float

    def __call__(self, x):
        return self.a * x + self.b


def chord(f: Callable[[float], float], m: float, M: float) -> ChordCoefficients:
    """Secant line of ``f`` over ``[m, M]``."""
    m, M = float(m), float(M)
    if not m < M:
        raise ValueError(f"chord needs m < M, got [{m}, {M}]")
    fm, fM = float(f(m)), float(f(M))
    a = (fM - fm) / (M - m)
    b = (M * fm - m * fM) / (M - m)
    for x, fx in ((m, fm), (M, fM)):
        if abs(a * x + b - fx) > 1e-10 * max(1.0, abs(fx)):
            raise ArithmeticError(f"chord interpolation lost precision at x={x}")
    return ChordCoefficients(a, b, m, M)


@dataclass(frozen=True, eq=False)
class LinearEnvelope:
    """``<a, x> + b <= f(x) <= <c, x> + d`` on a box."""

    a: tuple[float, ...]
    b: float
    c: tuple[float, ...]
    d: float
    f: Callable[..., float] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        a = tuple(float(v) for v in np.atleast_1d(self.a))
        c = tuple(float(v) for v in np.atleast_1d(self.c))
        if len(a) != len(c):
            raise ValueError("a and c must have the same length")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "d", float(self.d))

    @property
    def n_vars(self) -> int:
        return len(self.c)

    def lower_values(self, pts: np.ndarray) -> np.ndarray:
        return pts @ np.array(self.a) + self.b

    def upper_values(self, pts: np.ndarray) -> np.ndarray:
        return pts @ np.array(self.c) + self.d


def linear_envelope_verify(
    f: Callable[..., float],
    env: LinearEnvelope,
    box: Box,
    grid: int,
    lin_tol: float = 1e-9,
    max_listed: int = 100,
) -> EnvelopeReport:
    """Grid check of ``<a,x>+b <= f <= <c,x>+d``; gaps are reported, not bounded."""
    if grid < 2:
        raise ValueError("grid must be at least 2")
    if env.n_vars != box.n:
        raise ValueError("envelope and box dimensions differ")
    pts = box.grid(grid)
    fv = call_on_columns(f, *pts.T)
    up = env.upper_values(pts) - fv
    lo = fv - env.lower_values(pts)
    violations = []
    count = 0
    for kind, vals in (("upper_below_f", up), ("lower_above_f", lo)):
        idx = np.flatnonzero(vals < -lin_tol)
        count += idx.size
        order = idx[np.argsort(vals[idx], kind="stable")]
        for k in order[: max(0, max_listed - len(violations))]:
            violations.append((kind, tuple(map(float, pts[k])), float(vals[k])))
    iu, il = int(np.argmax(up)), int(np.argmax(lo))
    return EnvelopeReport(
        max_upper_gap=float(up[iu]),
        max_lower_gap=float(lo[il]),
        worst_points={"upper": tuple(map(float, pts[iu])), "lower": tuple(map(float, pts[il]))},
        violations=violations,
        violation_count=count,
        grid_per_axis=grid,
    )
