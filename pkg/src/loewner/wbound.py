"""W-bounds: least admissible constants for families of convex functions."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

import numpy as np

from ._numeric import call_on_columns
from ._sampling import random_hermitian
from .envelope import ChordCoefficients, chord
from .errors import PreconditionError
from .optimize import OptimizeConfig, box_optimize
from .opmaps import PolyMap, apply_polymap
from .spectral import apply_scalar_function, loewner_leq

__all__ = [
    "WBoundSpec",
    "WBoundResult",
    "WBoundReport",
    "ScalingReport",
    "DominationReport",
    "DominationHypothesisError",
    "w_bound_constant",
    "verify_w_bound",
    "scaling_check",
    "domination_check",
]


def _check_convex(f: Callable[[float], float], m: float, M: float, name: str) -> None:
    rng = np.random.default_rng(11)
    x = rng.uniform(m, M, 1000)
    y = rng.uniform(m, M, 1000)
    fx = call_on_columns(f, x)
    fy = call_on_columns(f, y)
    fmid = call_on_columns(f, (x + y) / 2)
    tol = 1e-10 * np.maximum(1.0, np.abs(fx) + np.abs(fy))
    bad = fmid > (fx + fy) / 2 + tol
    if bad.any():
        k = int(np.argmax(bad))
        raise ValueError(f"{name} fails midpoint convexity at ({x[k]:.6g}, {y[k]:.6g})")


@dataclass(frozen=True, eq=False)
class WBoundSpec:
    """Convex family, positive ``g`` on ``[m, M]``, a linear normalized map and weights."""

    family: tuple[Callable[[float], float], ...]
    g: Callable[[float], float]
    m: float
    M: float
    map: PolyMap | None = None
    weights: tuple[float, ...] | None = None
    names: tuple[str, ...] = ()
    chords: tuple[ChordCoefficients, ...] = field(default=(), init=False)

    def __post_init__(self) -> None:
        fam = tuple(self.family)
        if not fam:
            raise ValueError("family is empty")
        m, M = float(self.m), float(self.M)
        if not m < M:
            raise ValueError(f"need m < M, got [{m}, {M}]")
        phi = self.map if self.map is not None else PolyMap.identity(4)
        if not phi.is_linear:
            raise ValueError("W-bounds need a linear normalized map (a_1 = 1)")
        w = np.full(len(fam), 1.0 / len(fam)) if self.weights is None else np.asarray(self.weights, float)
        if w.shape != (len(fam),) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be a probability vector, one entry per function")
        names = tuple(self.names) or tuple(f"f{j}" for j in range(len(fam)))
        for f, name in zip(fam, names):
            _check_convex(f, m, M, name)
        gv = call_on_columns(self.g, np.linspace(m, M, 1001))
        if not np.all(gv > 0):
            k = int(np.argmax(~(gv > 0)))
            raise ValueError(f"g must be positive on [m, M]; g({np.linspace(m, M, 1001)[k]:.6g}) = {gv[k]:.6g}")
        for key, val in (("family", fam), ("m", m), ("M", M), ("map", phi),
                         ("weights", tuple(map(float, w))), ("names", names),
                         ("chords", tuple(chord(f, m, M) for f in fam))):
            object.__setattr__(self, key, val)

    def with_g(self, g: Callable[[float], float]) -> "WBoundSpec":
        return WBoundSpec(self.family, g, self.m, self.M, self.map, self.weights, self.names)


@dataclass(frozen=True)
class WBoundResult:
    constant: float
    arg_x: float
    per_function_chords: tuple[ChordCoefficients, ...]
    provenance: dict[str, Any] = field(default_factory=dict)


def _chord_ratio(spec: WBoundSpec) -> Callable:
    a = np.array([c.a for c in spec.chords])
    b = np.array([c.b for c in spec.chords])

    def h(x):
        x = np.asarray(x, dtype=float)
        top = np.max(np.multiply.outer(x, a) + b, axis=-1)
        return top / np.asarray(call_on_columns(spec.g, x))
    return h


def w_bound_constant(spec: WBoundSpec, cfg: OptimizeConfig | None = None) -> WBoundResult:
    """``max_x max_j (a_j x + b_j) / g(x)`` over ``[m, M]`` by grid and polish."""
    res = box_optimize(_chord_ratio(spec), [(spec.m, spec.M)], "max", cfg)
    prov = dict(res.provenance)
    prov["extremand"] = "max_j(a_j x + b_j)/g(x)"
    return WBoundResult(res.value, res.argpoint[0], spec.chords, prov)


@dataclass(frozen=True)
class WBoundReport:
    trials: int
    pass_count: int
    worst_witness: float
    constant: float
    failures: tuple[tuple[int, float], ...] = ()

    @property
    def all_pass(self) -> bool:
        return self.pass_count == self.trials


def verify_w_bound(
    spec: WBoundSpec,
    trials: int,
    seed: int = 0,
    *,
    constant: float | None = None,
    cert_tol: float = 1e-8,
) -> WBoundReport:
    """Loewner-check ``sum w_j Phi(f_j(A_j)) <= C g(sum w_j Phi(A_j))`` on random draws."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    C = w_bound_constant(spec).constant if constant is None else float(constant)
    phi = spec.map
    d = phi.dim_in
    passed = 0
    worst = np.inf
    failures = []
    for t, child in enumerate(np.random.SeedSequence(seed).spawn(trials)):
        rng = np.random.default_rng(child)
        As = [random_hermitian(d, spec.m, spec.M, rng) for _ in spec.family]
        lhs = sum(w * apply_polymap(phi, apply_scalar_function(A, f))
                  for w, f, A in zip(spec.weights, spec.family, As))
        mix = sum(w * apply_polymap(phi, A) for w, A in zip(spec.weights, As))
        rhs = C * apply_scalar_function(mix, spec.g)
        ok, wit = loewner_leq(lhs, rhs, cert_tol)
        passed += ok
        worst = min(worst, wit)
        if not ok:
            failures.append((t, wit))
    return WBoundReport(trials, passed, float(worst), C, tuple(failures))


@dataclass(frozen=True)
class ScalingReport:
    kappa: float
    constant: float
    scaled_constant: float
    expected: float
    abs_error: float
    same_argmax: bool
    holds: bool


def scaling_check(spec: WBoundSpec, kappa: float, tol: float = 1e-10) -> ScalingReport:
    """Compare the W-bound for ``kappa * g`` with the W-bound for ``g`` divided by ``kappa``."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    g = spec.g
    base = w_bound_constant(spec)
    scaled = w_bound_constant(spec.with_g(lambda x: kappa * g(x)))
    expected = base.constant / kappa
    err = abs(scaled.constant - expected)
    same = abs(scaled.arg_x - base.arg_x) <= 1e-9 * (spec.M - spec.m)
    return ScalingReport(float(kappa), base.constant, scaled.constant, expected, err, same,
                         err <= tol * max(1.0, abs(expected)))


class DominationHypothesisError(PreconditionError):
    def __init__(self, message: str, violating_y: float):
        super().__init__(message)
        self.violating_y = violating_y


@dataclass(frozen=True)
class DominationReport:
    u: float
    upsilon: float
    bound: float
    domination_factor: float
    holds: bool
    base_constant: float
    shifted_constant: float | None
    chained_constant: float | None


def domination_check(spec: WBoundSpec, u: float, upsilon: float, grid: int = 1001) -> DominationReport:
    """Scalar ``U = u I`` form of domination by a linear operator.

    Verifies ``g(u y) <= upsilon |u| g(y)`` on a grid of ``[m, M]`` and reports
    the least such factor, which must not exceed ``upsilon |u|``. When
    ``g(u .)`` stays positive, the W-bound for ``g(u .)`` chained with that
    factor gives an admissible constant for the original ``g``.
    """
    u = float(u)
    if u == 0.0:
        raise ValueError("u must be nonzero")
    if not upsilon > 0:
        raise ValueError("upsilon must be positive")
    bound = upsilon * abs(u)
    y = np.linspace(spec.m, spec.M, grid)
    gy = call_on_columns(spec.g, y)
    guy = call_on_columns(spec.g, u * y)
    slack = 1e-12 * np.maximum(1.0, np.abs(gy))
    bad = ~(guy <= bound * gy + slack)
    if bad.any():
        k = int(np.argmax(bad))
        raise DominationHypothesisError(
            f"g(u*y) = {guy[k]:.6g} exceeds upsilon*|u|*g(y) = {bound * gy[k]:.6g} at y = {y[k]:.6g}",
            float(y[k]),
        )
    factor = float(np.max(guy / gy))
    base = w_bound_constant(spec).constant
    shifted = chained = None
    if np.all(guy > 0):
        g = spec.g
        shifted = w_bound_constant(spec.with_g(lambda x: g(u * x))).constant
        chained = shifted * factor
    return DominationReport(u, float(upsilon), bound, factor, factor <= bound * (1 + 1e-12),
                            base, shifted, chained)
