"""Weighted map sums, extremal constants and Loewner-checked bound certificates."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Mapping, Sequence, Union

import numpy as np

from ._numeric import call_on_columns
from .envelope import EnvelopePair, LinearEnvelope
from .errors import DomainError, NonCommutingError, PreconditionError
from .optimize import OptimizeConfig, OptimizeResult, as_intervals, box_optimize
from .opmaps import (
    PolyMap,
    SpectrumRange,
    apply_polymap,
    build_poly_bound_operator,
    scalar_poly_range,
    weighted_range_sum,
)
from .spectral import (
    Box,
    apply_scalar_function,
    as_hermitian,
    commutator_norm,
    joint_diagonalize,
    loewner_leq,
    multivariate_operator_function,
)

__all__ = [
    "CERT_TOL",
    "WeightGrid",
    "OperatorFamily",
    "GFunction",
    "BoundCertificate",
    "FOf",
    "RepeatedPoly",
    "RawAxis",
    "BoundContext",
    "weighted_phi_sum",
    "certify",
    "fundamental_bound",
    "affine_bound",
    "ratio_bound",
    "LinearRatioConstant",
    "linear_ratio_constant",
    "difference_bound",
]

CERT_TOL = 1e-8
REPEATED_NOTE = "g arguments evaluate the bound operators at repeated axis tuples"
GRID_NOTE = "eigenvalue ranges are grid estimated"


@dataclass(frozen=True, eq=False)
class WeightGrid:
    """One probability vector per axis; multi-index weights are products."""

    axis_weights: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        ws = []
        for i, w in enumerate(self.axis_weights):
            w = np.asarray(w, dtype=float).reshape(-1)
            if w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError(f"axis {i}: weights must be finite and nonnegative")
            if abs(w.sum() - 1.0) > 1e-12:
                raise ValueError(f"axis {i}: weights sum to {w.sum()!r}, not 1")
            w.setflags(write=False)
            ws.append(w)
        if not ws:
            raise ValueError("need at least one axis")
        object.__setattr__(self, "axis_weights", tuple(ws))

    @classmethod
    def uniform(cls, counts: Sequence[int]) -> "WeightGrid":
        return cls(tuple(np.full(k, 1.0 / k) for k in counts))

    @property
    def n(self) -> int:
        return len(self.axis_weights)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(w.size for w in self.axis_weights)

    def multi_indices(self):
        return itertools.product(*(range(k) for k in self.counts))

    def weight(self, j: Sequence[int]) -> float:
        return float(np.prod([w[i] for w, i in zip(self.axis_weights, j)]))


@dataclass(frozen=True, eq=False)
class OperatorFamily:
    """Per-axis lists of Hermitian operators with spectra inside ``box``."""

    axes: tuple[tuple[np.ndarray, ...], ...]
    intervals: tuple[tuple[float, float], ...]
    commuting: bool = False
    spectrum_tol: float = 1e-9

    def __post_init__(self) -> None:
        axes = tuple(tuple(as_hermitian(A) for A in ax) for ax in self.axes)
        ivs = as_intervals(self.intervals)
        if len(axes) != len(ivs):
            raise ValueError(f"{len(axes)} axes but {len(ivs)} spectrum intervals")
        object.__setattr__(self, "intervals", tuple(ivs))
        d = None
        for i, ax in enumerate(axes):
            if not ax:
                raise ValueError(f"axis {i} is empty")
            lo, hi = ivs[i]
            tol = self.spectrum_tol * max(1.0, abs(lo), abs(hi))
            for k, A in enumerate(ax):
                if d is None:
                    d = A.shape[0]
                if A.shape[0] != d:
                    raise ValueError(f"operator ({i},{k}) has dimension {A.shape[0]}, expected {d}")
                lam = np.linalg.eigvalsh(A)
                if lam[0] < lo - tol or lam[-1] > hi + tol:
                    raise PreconditionError(
                        f"operator ({i},{k}) spectrum [{lam[0]:.6g}, {lam[-1]:.6g}] "
                        f"outside [{lo:.6g}, {hi:.6g}]"
                    )
        if self.commuting:
            joint_diagonalize([A for ax in axes for A in ax])
        object.__setattr__(self, "axes", axes)

    @property
    def box(self) -> Box:
        """Spectrum box; raises for a degenerate interval."""
        return Box(self.intervals)

    @property
    def n(self) -> int:
        return len(self.axes)

    @property
    def dim(self) -> int:
        return self.axes[0][0].shape[0]

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(len(ax) for ax in self.axes)

    def tuple_for(self, j: Sequence[int]) -> list[np.ndarray]:
        return [self.axes[i][ji] for i, ji in enumerate(j)]


_KINDS = ("power", "log", "exp", "custom")


@dataclass(frozen=True, eq=False)
class GFunction:
    """Scalar function ``g`` of ``n`` variables with an operator lift.

    power: ``(sum beta_i x_i)^q``; log: ``log(sum beta_i x_i)``;
    exp: ``exp(sum beta_i x_i)``; custom: any callable, lifted by joint
    spectral calculus. ``scale`` multiplies the whole function.
    """

    kind: str
    beta: tuple[float, ...] = ()
    q: float = 1.0
    func: Callable[..., float] | None = field(default=None, repr=False)
    n_vars: int | None = None
    scale: float = 1.0
    name: str = ""

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown g kind {self.kind!r}; expected one of {_KINDS}")
        beta = tuple(float(b) for b in np.atleast_1d(self.beta)) if len(np.atleast_1d(self.beta)) else ()
        object.__setattr__(self, "beta", beta)
        if self.kind == "custom":
            if self.func is None or self.n_vars is None:
                raise ValueError("custom g needs func and n_vars")
        else:
            if not beta:
                raise ValueError(f"{self.kind} g needs a beta vector")
            if self.kind in ("power", "log") and any(b < 0 for b in beta):
                raise ValueError(f"{self.kind} g needs a nonnegative beta")
            object.__setattr__(self, "n_vars", len(beta))
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise ValueError("scale must be positive")

    @classmethod
    def power(cls, beta, q: float) -> "GFunction":
        return cls("power", tuple(np.atleast_1d(beta)), q=float(q))

    @classmethod
    def log(cls, beta) -> "GFunction":
        return cls("log", tuple(np.atleast_1d(beta)))

    @classmethod
    def exp(cls, beta) -> "GFunction":
        return cls("exp", tuple(np.atleast_1d(beta)))

    @classmethod
    def custom(cls, func: Callable[..., float], n_vars: int, name: str = "") -> "GFunction":
        return cls("custom", (), func=func, n_vars=n_vars, name=name)

    def scaled(self, kappa: float) -> "GFunction":
        return GFunction(self.kind, self.beta, self.q, self.func, self.n_vars,
                         self.scale * float(kappa), self.name)

    @property
    def needs_positive(self) -> bool:
        """log and non-integer or negative powers need ``sum beta_i x_i > 0``."""
        if self.kind == "log":
            return True
        return self.kind == "power" and not (float(self.q).is_integer() and self.q >= 0)

    def _outer(self, t):
        if self.kind == "power":
            return t**self.q
        if self.kind == "log":
            return np.log(t)
        return np.exp(t)

    def __call__(self, *xs):
        if len(xs) != self.n_vars:
            raise ValueError(f"g takes {self.n_vars} arguments, got {len(xs)}")
        if self.kind == "custom":
            return self.scale * call_on_columns(self.func, *map(np.asarray, xs))
        t = sum(b * np.asarray(x, dtype=float) for b, x in zip(self.beta, xs))
        with np.errstate(all="ignore"):
            out = self._outer(t)
            if self.needs_positive:
                out = np.where(t > 0, out, np.nan)
        return self.scale * out

    def check_domain(self, ranges: Sequence[SpectrumRange]) -> None:
        """Guard ``sum beta_i x_i > 0`` over a box of argument ranges."""
        if len(ranges) != self.n_vars:
            raise ValueError(f"g takes {self.n_vars} arguments, got {len(ranges)} ranges")
        if self.needs_positive:
            low = sum(min(b * r.lo, b * r.hi) for b, r in zip(self.beta, ranges))
            if not low > 0:
                raise DomainError(
                    f"{self.kind} g needs sum(beta*x) > 0 on its domain; minimum is {low:.6g}"
                )

    def operator(self, args: Sequence[np.ndarray]) -> np.ndarray:
        """Operator value ``g(X_1, ..., X_n)``."""
        if len(args) != self.n_vars:
            raise ValueError(f"g takes {self.n_vars} operators, got {len(args)}")
        if self.kind == "custom":
            return self.scale * multivariate_operator_function(self.func, args)
        Y = sum(b * as_hermitian(X) for b, X in zip(self.beta, args))
        if self.needs_positive:
            lam = np.linalg.eigvalsh(Y)
            if not lam[0] > 0:
                raise DomainError(
                    f"{self.kind} g needs sum(beta*X) positive definite; min eigenvalue {lam[0]:.6g}"
                )
        return self.scale * apply_scalar_function(Y, self._outer)

    def describe(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"kind": self.kind}
        if self.kind == "custom":
            doc["name"] = self.name
            doc["n_vars"] = self.n_vars
        else:
            doc["beta"] = list(self.beta)
            if self.kind == "power":
                doc["q"] = self.q
        if self.scale != 1.0:
            doc["scale"] = self.scale
        return doc


@dataclass(frozen=True, eq=False)
class BoundCertificate:
    """A materialized inequality ``lhs <= rhs`` with its Loewner witness."""

    inequality_id: str
    lhs: np.ndarray
    rhs: np.ndarray
    constant: float
    constant_provenance: dict[str, Any]
    witness: float
    holds: bool
    ranges_used: tuple[SpectrumRange, ...] = ()
    g_operator: np.ndarray | None = field(default=None, repr=False)
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.inequality_id,
            "constant": self.constant,
            "witness": self.witness,
            "holds": self.holds,
            "provenance": self.constant_provenance,
            "ranges": [r.to_dict() for r in self.ranges_used],
            "notes": list(self.notes),
        }


def certify(
    inequality_id: str,
    lhs: np.ndarray,
    rhs: np.ndarray,
    constant: float,
    provenance: Mapping[str, Any],
    ranges: Sequence[SpectrumRange] = (),
    *,
    g_operator: np.ndarray | None = None,
    notes: Sequence[str] = (),
    cert_tol: float = CERT_TOL,
) -> BoundCertificate:
    holds, witness = loewner_leq(lhs, rhs, cert_tol)
    return BoundCertificate(
        inequality_id, lhs, rhs, float(constant), dict(provenance), witness, holds,
        tuple(ranges), g_operator, tuple(notes),
    )


# expression forms accepted by weighted_phi_sum

@dataclass(frozen=True)
class FOf:
    """``f`` evaluated at the multi-index tuple (joint spectral calculus)."""

    f: Callable[..., float]


@dataclass(frozen=True)
class RepeatedPoly:
    """Bound operator evaluated at the ``n``-fold repetition of one axis operator."""

    axis: int
    side: str
    pair: EnvelopePair


@dataclass(frozen=True)
class RawAxis:
    """The axis operator itself."""

    axis: int


Maps = Union[PolyMap, Mapping[tuple, PolyMap], Callable[[tuple], PolyMap]]


def _map_for(maps: Maps, j: tuple) -> PolyMap:
    if isinstance(maps, PolyMap):
        return maps
    if callable(maps) and not isinstance(maps, Mapping):
        return maps(j)
    return maps[j]


def weighted_phi_sum(expr, family: OperatorFamily, maps: Maps, w: WeightGrid) -> np.ndarray:
    """Exact sum over all multi-indices ``j`` of ``w_j Phi_j(expr_j)``."""
    if w.counts != family.counts:
        raise ValueError(f"weight counts {w.counts} do not match family counts {family.counts}")
    if isinstance(expr, FOf) and not family.commuting:
        raise NonCommutingError("f(A_j) needs a commuting family")
    total = None
    memo: dict[tuple, np.ndarray] = {}
    for j in w.multi_indices():
        phi = _map_for(maps, j)
        wj = w.weight(j)
        if isinstance(expr, FOf):
            X = multivariate_operator_function(expr.f, family.tuple_for(j))
            term = apply_polymap(phi, X)
        elif isinstance(expr, RepeatedPoly):
            key = (id(phi), j[expr.axis])
            if key not in memo:
                A = family.axes[expr.axis][j[expr.axis]]
                memo[key] = build_poly_bound_operator(expr.side, phi, expr.pair, [A] * family.n)
            term = memo[key]
        elif isinstance(expr, RawAxis):
            key = (id(phi), j[expr.axis])
            if key not in memo:
                memo[key] = apply_polymap(phi, family.axes[expr.axis][j[expr.axis]])
            term = memo[key]
        else:
            raise TypeError(f"unsupported expression {expr!r}")
        total = wj * term if total is None else total + wj * term
    return (total + total.conj().T) / 2


def _distinct_maps(maps: Maps, w: WeightGrid) -> list[tuple[tuple, PolyMap, float]]:
    return [(j, _map_for(maps, j), w.weight(j)) for j in w.multi_indices()]


class BoundContext:
    """Shared intermediate results for certificates on one scenario.

    Holds the left-hand sum, the g-argument operators and the grid-estimated
    eigenvalue ranges so that several bound kinds can reuse them.
    """

    def __init__(
        self,
        pair: EnvelopePair,
        family: OperatorFamily,
        maps: Maps,
        w: WeightGrid,
        *,
        range_grid: int = 24,
        conservative: bool = True,
        opt: OptimizeConfig | None = None,
        cert_tol: float = CERT_TOL,
    ) -> None:
        if pair.n_vars != family.n:
            raise ValueError(f"envelopes have {pair.n_vars} variables, family has {family.n} axes")
        self.pair, self.family, self.maps, self.w = pair, family, maps, w
        self.range_grid = range_grid
        self.conservative = conservative
        self.opt = opt or OptimizeConfig()
        self.cert_tol = cert_tol
        self._range_cache: dict[tuple, SpectrumRange] = {}
        self._check_boxes()

    def _check_boxes(self) -> None:
        env = self.pair.box.intervals
        fam = self.family.intervals
        for i, (lo, hi) in enumerate(fam):
            for k, (elo, ehi) in enumerate(env):
                # the repeated tuples put every axis interval on every envelope axis
                if lo < elo - 1e-12 or hi > ehi + 1e-12:
                    raise PreconditionError(
                        f"axis {i} interval [{lo}, {hi}] leaves envelope axis {k} [{elo}, {ehi}]"
                    )

    @cached_property
    def lhs(self) -> np.ndarray:
        if self.pair.f is None:
            raise ValueError("envelope pair does not retain f")
        return weighted_phi_sum(FOf(self.pair.f), self.family, self.maps, self.w)

    def _range(self, side: str, phi: PolyMap, box: Box) -> SpectrumRange:
        key = (side, phi.coefficient_key(), box.intervals)
        if key not in self._range_cache:
            self._range_cache[key] = scalar_poly_range(
                side, phi, self.pair, box, self.range_grid, conservative=self.conservative
            )
        return self._range_cache[key]

    def f_range(self, side: str) -> SpectrumRange:
        items = _distinct_maps(self.maps, self.w)
        return weighted_range_sum(
            [self._range(side, phi, self.family.box) for _, phi, _ in items],
            [wj for _, _, wj in items],
        )

    def g_ranges(self, side: str) -> list[SpectrumRange]:
        items = _distinct_maps(self.maps, self.w)
        n = self.family.n
        out = []
        for lo, hi in self.family.box.intervals:
            box = Box.cube(lo, hi, n)
            out.append(weighted_range_sum(
                [self._range(side, phi, box) for _, phi, _ in items],
                [wj for _, _, wj in items],
            ))
        return out

    def g_args(self, side: str) -> list[np.ndarray]:
        cache = self.__dict__.setdefault("_g_args", {})
        if side not in cache:
            cache[side] = [
                weighted_phi_sum(RepeatedPoly(ell, side, self.pair), self.family, self.maps, self.w)
                for ell in range(self.family.n)
            ]
        return cache[side]

    def g_operator(self, g: GFunction, side: str) -> np.ndarray:
        return g.operator(self.g_args(side))


def _context(pair, family, maps, w, context: BoundContext | None) -> BoundContext:
    if context is not None:
        return context
    return BoundContext(pair, family, maps, w)


def _optimize(ctx_opt, h, ranges, mode) -> OptimizeResult:
    return box_optimize(h, ranges, mode, ctx_opt)


def _provenance(res: OptimizeResult, extremand: str, mode: str) -> dict[str, Any]:
    doc = dict(res.provenance)
    doc.update({"extremand": extremand, "mode": mode, "argpoint": list(res.argpoint)})
    return doc


def _check_monotone(F, f_range: SpectrumRange, g, g_ranges, samples: int = 200) -> None:
    rng = np.random.default_rng(7)
    u = rng.uniform(f_range.lo, f_range.hi, (samples, 2))
    u.sort(axis=1)
    xs = [rng.uniform(r.lo, r.hi, samples) for r in g_ranges]
    v = np.asarray(g(*xs), dtype=float)
    lo = call_on_columns(F, u[:, 0], v)
    hi = call_on_columns(F, u[:, 1], v)
    scale = np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
    bad = lo > hi + 1e-12 * scale
    if bad.any():
        k = int(np.argmax(bad))
        raise ValueError(
            f"F is not monotone in its first argument: F({u[k, 0]:.6g}, v) > F({u[k, 1]:.6g}, v)"
        )


def fundamental_bound(
    side: str,
    F: Callable[[float, float], float],
    g: GFunction,
    pair: EnvelopePair,
    family: OperatorFamily,
    maps: Maps,
    w: WeightGrid,
    *,
    context: BoundContext | None = None,
) -> BoundCertificate:
    """``F(sum w Phi(f(A)), g(...))`` against its extremal constant times ``I``.

    The constant is the max (upper) or min (lower) of ``F(x, g(x_1..x_n))``
    with ``x`` and each ``x_l`` ranging independently over their estimated
    eigenvalue ranges. ``F`` is evaluated on operators by joint spectral
    calculus, so the left-hand sum and the g operator must commute.
    """
    ctx = _context(pair, family, maps, w, context)
    fr = ctx.f_range(side)
    gr = ctx.g_ranges(side)
    g.check_domain(gr)
    _check_monotone(F, fr, g, gr)
    G = ctx.g_operator(g, side)
    U = ctx.lhs
    c = commutator_norm(U, G)
    if c > 1e-8 * max(1.0, np.linalg.norm(U) * np.linalg.norm(G)):
        raise NonCommutingError(f"F needs commuting arguments; ||[U, G]||_F = {c:.3e}")
    FU = multivariate_operator_function(F, [U, G])
    mode = "max" if side == "upper" else "min"
    res = _optimize(ctx.opt, lambda x, *xs: F(x, g(*xs)), [fr, *gr], mode)
    eye = np.eye(U.shape[0]) * res.value
    lhs, rhs = (FU, eye) if side == "upper" else (eye, FU)
    return certify(
        f"fundamental/{side}", lhs, rhs, res.value,
        _provenance(res, "F(x, g(x_1..x_n))", mode), [fr, *gr],
        g_operator=G, notes=(REPEATED_NOTE, GRID_NOTE), cert_tol=ctx.cert_tol,
    )


def _affine_constant(ctx: BoundContext, side: str, alpha: float, g: GFunction):
    fr = ctx.f_range(side)
    gr = ctx.g_ranges(side)
    g.check_domain(gr)
    mode = "max" if side == "upper" else "min"
    res = _optimize(ctx.opt, lambda x, *xs: x - alpha * g(*xs), [fr, *gr], mode)
    return res, mode, [fr, *gr]


def _affine_certificate(ctx, side, alpha, g, tag, extremand) -> BoundCertificate:
    res, mode, ranges = _affine_constant(ctx, side, alpha, g)
    G = ctx.g_operator(g, side)
    U = ctx.lhs
    bound = alpha * G + res.value * np.eye(U.shape[0])
    lhs, rhs = (U, bound) if side == "upper" else (bound, U)
    prov = _provenance(res, extremand, mode)
    prov["alpha"] = alpha
    return certify(
        f"{tag}/{side}", lhs, rhs, res.value, prov, ranges,
        g_operator=G, notes=(REPEATED_NOTE, GRID_NOTE), cert_tol=ctx.cert_tol,
    )


def affine_bound(
    side: str,
    alpha: float,
    g: GFunction,
    pair: EnvelopePair,
    family: OperatorFamily,
    maps: Maps,
    w: WeightGrid,
    *,
    context: BoundContext | None = None,
) -> BoundCertificate:
    """Special case ``F(u, v) = u - alpha v``: ``lhs <= alpha g(...) + c I``."""
    ctx = _context(pair, family, maps, w, context)
    return _affine_certificate(ctx, side, float(alpha), g, "affine", "x - alpha*g(x_1..x_n)")


def _linear_setup(env: LinearEnvelope, family: OperatorFamily, maps: Maps, w: WeightGrid, f):
    f = f if f is not None else env.f
    if f is None:
        raise ValueError("linear envelope path needs f (pass f= or keep it on the envelope)")
    if env.n_vars != family.n:
        raise ValueError(f"envelope has {env.n_vars} variables, family has {family.n} axes")
    for _, phi, _ in _distinct_maps(maps, w):
        if not phi.is_linear:
            raise PreconditionError("linear envelope path needs linear normalized maps (a_1 = 1)")
    U = weighted_phi_sum(FOf(f), family, maps, w)
    X = [weighted_phi_sum(RawAxis(i), family, maps, w) for i in range(family.n)]
    ranges = [SpectrumRange(lo, hi, 0.0, False) for lo, hi in family.intervals]
    return U, X, ranges


def _sign_case(g: GFunction, ranges, opt: OptimizeConfig, sign_case: str | None) -> str:
    lo = box_optimize(g, ranges, "min", opt)
    hi = box_optimize(g, ranges, "max", opt)
    if sign_case is None:
        sign_case = "g_pos" if lo.value > 0 else "g_neg" if hi.value < 0 else None
        if sign_case is None:
            raise PreconditionError(
                f"g changes sign on its domain (min {lo.value:.6g} at {lo.argpoint}, "
                f"max {hi.value:.6g} at {hi.argpoint})"
            )
    if sign_case == "g_pos" and not lo.value > 0:
        raise PreconditionError(f"g_pos needs g > 0; g = {lo.value:.6g} at {lo.argpoint}")
    if sign_case == "g_neg" and not hi.value < 0:
        raise PreconditionError(f"g_neg needs g < 0; g = {hi.value:.6g} at {hi.argpoint}")
    if sign_case not in ("g_pos", "g_neg"):
        raise ValueError(f"sign_case must be 'g_pos' or 'g_neg', got {sign_case!r}")
    return sign_case


def _check_operator_sign(G: np.ndarray, sign_case: str) -> None:
    lam = np.linalg.eigvalsh(G)
    if sign_case == "g_pos" and not lam[0] > 0:
        raise PreconditionError(f"g(...) must be positive definite; eigenvalue {lam[0]:.6g}")
    if sign_case == "g_neg" and not lam[-1] < 0:
        raise PreconditionError(f"g(...) must be negative definite; eigenvalue {lam[-1]:.6g}")


def _ratio_mode(side: str, sign_case: str) -> str:
    # dividing by a negative g flips the direction of the extremum
    upper = side == "upper"
    return "max" if upper == (sign_case == "g_pos") else "min"


@dataclass(frozen=True)
class LinearRatioConstant:
    result: OptimizeResult
    sign_case: str
    mode: str


def linear_ratio_constant(
    side: str,
    g: GFunction,
    env: LinearEnvelope,
    intervals,
    sign_case: str | None = None,
    opt: OptimizeConfig | None = None,
) -> LinearRatioConstant:
    """Coupled extremum of the linear envelope over ``g`` on the spectrum box.

    Depends only on the box, so it can be reused across sampled families.
    """
    opt = opt or OptimizeConfig()
    ranges = [SpectrumRange(lo, hi, 0.0, False) for lo, hi in as_intervals(intervals)]
    g.check_domain(ranges)
    case = _sign_case(g, ranges, opt, sign_case)
    coef, off = (env.c, env.d) if side == "upper" else (env.a, env.b)
    coef_arr = np.array(coef)

    def h(*xs):
        lin = sum(ci * np.asarray(x, dtype=float) for ci, x in zip(coef_arr, xs)) + off
        return lin / g(*xs)
    mode = _ratio_mode(side, case)
    return LinearRatioConstant(box_optimize(h, ranges, mode, opt), case, mode)


def ratio_bound(
    side: str,
    g: GFunction,
    envelopes: EnvelopePair | LinearEnvelope,
    family: OperatorFamily,
    maps: Maps,
    w: WeightGrid,
    sign_case: str | None = None,
    *,
    f: Callable[..., float] | None = None,
    context: BoundContext | None = None,
    opt: OptimizeConfig | None = None,
    precomputed: "LinearRatioConstant | None" = None,
) -> BoundCertificate:
    """Ratio-kind bound ``lhs <= alpha g(...)`` (upper) or ``alpha g(...) <= lhs`` (lower).

    With sigmoid envelopes the constant is extremized over independent
    ranges of ``x`` and the g arguments. With a linear envelope the constant
    is the coupled extremum of ``(<c,x> + d) / g(x)`` (upper) or
    ``(<a,x> + b) / g(x)`` (lower) over the family box, and g is applied to
    the raw weighted map sums.
    """
    if side not in ("upper", "lower"):
        raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")
    if isinstance(envelopes, LinearEnvelope):
        U, X, ranges = _linear_setup(envelopes, family, maps, w, f)
        if precomputed is None:
            precomputed = linear_ratio_constant(side, g, envelopes, family.intervals, sign_case, opt)
        res, case, mode = precomputed.result, precomputed.sign_case, precomputed.mode
        G = g.operator(X)
        _check_operator_sign(G, case)
        extremand = "(<c,x>+d)/g(x)" if side == "upper" else "(<a,x>+b)/g(x)"
        tol = CERT_TOL
        notes: tuple[str, ...] = ("linear envelope path",)
    else:
        ctx = _context(envelopes, family, maps, w, context)
        U = ctx.lhs
        fr = ctx.f_range(side)
        gr = ctx.g_ranges(side)
        g.check_domain(gr)
        case = _sign_case(g, gr, ctx.opt, sign_case)
        G = ctx.g_operator(g, side)
        _check_operator_sign(G, case)
        mode = _ratio_mode(side, case)
        res = box_optimize(lambda x, *xs: x / g(*xs), [fr, *gr], mode, ctx.opt)
        ranges = [fr, *gr]
        extremand = "x/g(x_1..x_n)"
        tol = ctx.cert_tol
        notes = (REPEATED_NOTE, GRID_NOTE)
    bound = res.value * G
    lhs, rhs = (U, bound) if side == "upper" else (bound, U)
    prov = _provenance(res, extremand, mode)
    prov["sign_case"] = case
    return certify(f"ratio/{case}/{side}", lhs, rhs, res.value, prov, ranges,
                   g_operator=G, notes=notes, cert_tol=tol)


def difference_bound(
    side: str,
    g: GFunction,
    envelopes: EnvelopePair | LinearEnvelope,
    family: OperatorFamily,
    maps: Maps,
    w: WeightGrid,
    *,
    f: Callable[..., float] | None = None,
    context: BoundContext | None = None,
    opt: OptimizeConfig | None = None,
) -> BoundCertificate:
    """Difference-kind bound ``lhs - g(...) <= beta I`` (upper) or ``>= beta I`` (lower)."""
    if side not in ("upper", "lower"):
        raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")
    if not isinstance(envelopes, LinearEnvelope):
        ctx = _context(envelopes, family, maps, w, context)
        return _affine_certificate(ctx, side, 1.0, g, "difference", "x - g(x_1..x_n)")
    opt = opt or OptimizeConfig()
    U, X, ranges = _linear_setup(envelopes, family, maps, w, f)
    g.check_domain(ranges)
    G = g.operator(X)
    coef, off = (envelopes.c, envelopes.d) if side == "upper" else (envelopes.a, envelopes.b)
    coef_arr = np.array(coef)

    def h(*xs):
        lin = sum(ci * np.asarray(x, dtype=float) for ci, x in zip(coef_arr, xs)) + off
        return lin - g(*xs)
    mode = "max" if side == "upper" else "min"
    res = box_optimize(h, ranges, mode, opt)
    bound = G + res.value * np.eye(U.shape[0])
    lhs, rhs = (U, bound) if side == "upper" else (bound, U)
    extremand = "<c,x>+d-g(x)" if side == "upper" else "<a,x>+b-g(x)"
    return certify(f"difference/{side}", lhs, rhs, res.value, _provenance(res, extremand, mode),
                   ranges, g_operator=G, notes=("linear envelope path",))
