"""Interval-coefficient monoids and Monte-Carlo checks of Ky Fan tail domination."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._sampling import haar_unitary, hermitian_with_spectrum
from .bounds import BoundCertificate, GFunction, OperatorFamily, WeightGrid, certify, linear_ratio_constant, ratio_bound
from .envelope import LinearEnvelope
from .errors import LoewnerError, NonCommutingError, PreconditionError
from .opmaps import PolyMap
from .spectral import commutator_norm, ky_fan_norm

__all__ = [
    "IntervalCoefficient",
    "ZERO",
    "ONE",
    "interval_add",
    "interval_mul",
    "combine_operator_bounds",
    "EnsembleSpec",
    "sample_ensemble",
    "TailQuery",
    "TailReport",
    "mc_tail_check",
    "linear_ratio_builder",
    "original_product_event",
    "rescaled_product_event",
]


@dataclass(frozen=True)
class IntervalCoefficient:
    """Closed interval ``[lo, hi]`` of bound constants."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
            raise ValueError(f"invalid interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __add__(self, other: "IntervalCoefficient") -> "IntervalCoefficient":
        return interval_add(self, other)

    def __mul__(self, other: "IntervalCoefficient") -> "IntervalCoefficient":
        return interval_mul(self, other)


ZERO = IntervalCoefficient(0.0, 0.0)
ONE = IntervalCoefficient(1.0, 1.0)


def interval_add(p: IntervalCoefficient, q: IntervalCoefficient) -> IntervalCoefficient:
    return IntervalCoefficient(p.lo + q.lo, p.hi + q.hi)


def interval_mul(p: IntervalCoefficient, q: IntervalCoefficient) -> IntervalCoefficient:
    """Product of strictly positive intervals."""
    if not (p.lo > 0 and q.lo > 0):
        raise ValueError(f"interval product needs positive intervals, got {p} and {q}")
    return IntervalCoefficient(p.lo * q.lo, p.hi * q.hi)


def _upper_form(cert: BoundCertificate, name: str) -> np.ndarray:
    G = cert.g_operator
    if G is None:
        raise ValueError(f"{name} carries no g operator")
    scale = max(1.0, float(np.linalg.norm(cert.rhs)))
    if np.linalg.norm(cert.rhs - cert.constant * G) > 1e-10 * scale:
        raise ValueError(f"{name} is not of the form lhs <= constant * g(...)")
    return G


def combine_operator_bounds(
    mode: str,
    cert_f: BoundCertificate,
    cert_h: BoundCertificate,
    cert_tol: float = 1e-8,
) -> BoundCertificate:
    """Sum or product of two upper certificates that share ``g(...)``.

    add: ``U_f + U_h <= (alpha_f + alpha_h) g``.
    mul: ``U_f U_h <= alpha_f alpha_h g^2`` for commuting, positive data.
    """
    Gf = _upper_form(cert_f, "cert_f")
    Gh = _upper_form(cert_h, "cert_h")
    if Gf.shape != Gh.shape or np.linalg.norm(Gf - Gh) > 1e-10 * max(1.0, np.linalg.norm(Gf)):
        raise ValueError("certificates use different g(...) operators")
    cf, ch = cert_f.constant, cert_h.constant
    prov = {"mode": mode, "alpha_f": cf, "alpha_h": ch}
    if mode == "add":
        c = cf + ch
        return certify("combined/add", cert_f.lhs + cert_h.lhs, c * Gf, c, prov,
                       g_operator=Gf, cert_tol=cert_tol)
    if mode != "mul":
        raise ValueError(f"mode must be 'add' or 'mul', got {mode!r}")
    if not (cf > 0 and ch > 0):
        raise PreconditionError(f"product needs positive constants, got {cf:.6g} and {ch:.6g}")
    gmin = float(np.linalg.eigvalsh(Gf)[0])
    if gmin < -cert_tol:
        raise PreconditionError(f"product needs g(...) >= 0; min eigenvalue {gmin:.6g}")
    for name, U in (("f", cert_f.lhs), ("h", cert_h.lhs)):
        lam = float(np.linalg.eigvalsh(U)[0])
        if lam < -cert_tol:
            raise PreconditionError(f"product needs U_{name} >= 0; min eigenvalue {lam:.6g}")
    Uf, Uh = cert_f.lhs, cert_h.lhs
    comm = commutator_norm(Uf, Uh)
    if comm > 1e-8 * max(1.0, np.linalg.norm(Uf) * np.linalg.norm(Uh)):
        raise NonCommutingError(f"product of non-commuting sides; ||[U_f, U_h]||_F = {comm:.3e}")
    P = Uf @ Uh
    c = cf * ch
    return certify("combined/mul", (P + P.conj().T) / 2, c * (Gf @ Gf), c, prov,
                   g_operator=Gf, cert_tol=cert_tol)


@dataclass(frozen=True)
class EnsembleSpec:
    """Random Hermitian family: per-axis spectrum intervals and counts."""

    dim: int
    boxes: tuple[tuple[float, float], ...]
    counts: tuple[int, ...]
    seed: int | np.random.SeedSequence = 0
    commuting: bool = True

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be positive")
        boxes = tuple((float(lo), float(hi)) for lo, hi in self.boxes)
        if any(not lo <= hi for lo, hi in boxes):
            raise ValueError(f"invalid boxes {boxes}")
        counts = tuple(int(k) for k in self.counts)
        if len(counts) != len(boxes) or any(k < 1 for k in counts):
            raise ValueError("need one positive count per box")
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "counts", counts)


def sample_ensemble(spec: EnsembleSpec) -> OperatorFamily:
    """Each operator is ``U diag(lambda) U*`` with ``U`` Haar and ``lambda`` uniform in its box.

    A commuting ensemble shares one ``U`` across the whole family.
    """
    rng = np.random.default_rng(spec.seed)
    shared = haar_unitary(spec.dim, rng) if spec.commuting else None
    axes = []
    for (lo, hi), k in zip(spec.boxes, spec.counts):
        ops = []
        for _ in range(k):
            U = shared if shared is not None else haar_unitary(spec.dim, rng)
            ops.append(hermitian_with_spectrum(U, rng.uniform(lo, hi, spec.dim)))
        axes.append(tuple(ops))
    return OperatorFamily(tuple(axes), spec.boxes, commuting=spec.commuting)


@dataclass(frozen=True)
class TailQuery:
    theta: float
    ell: int
    trials: int
    statistic: str = "sum"

    def __post_init__(self) -> None:
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if self.statistic not in ("sum", "product"):
            raise ValueError("statistic must be 'sum' or 'product'")


@dataclass(frozen=True)
class TailReport:
    trial_count: int
    accepted: int
    excluded: int
    certificate_failures: int
    p_lhs: float
    p_rhs: float
    stderr_lhs: float
    stderr_rhs: float
    direction_holds: bool
    domination_violations: int
    theta: float
    ell: int
    statistic: str

    @property
    def stderr(self) -> float:
        return math.sqrt(self.stderr_lhs**2 + self.stderr_rhs**2)

    def to_record(self) -> dict:
        return {
            "trial_count": self.trial_count,
            "excluded": self.excluded,
            "p_lhs": self.p_lhs,
            "p_rhs": self.p_rhs,
            "stderr": self.stderr,
            "theta": self.theta,
            "ell": self.ell,
            "statistic": self.statistic,
            "accepted": self.accepted,
            "certificate_failures": self.certificate_failures,
            "domination_violations": self.domination_violations,
            "direction_holds": self.direction_holds,
        }


def original_product_event(G: np.ndarray, alpha: float, theta: float, ell: int) -> bool:
    """``||alpha G^2||_ell >= theta``."""
    return ky_fan_norm(alpha * (G @ G), ell) >= theta


def rescaled_product_event(G: np.ndarray, alpha: float, theta: float, ell: int) -> bool:
    """``||G||_ell >= sqrt(theta / alpha)``.

    Identical to :func:`original_product_event` for ``ell = 1``; for larger
    ``ell`` and ``G >= 0`` it is implied by it.
    """
    return ky_fan_norm(G, ell) >= math.sqrt(theta / alpha)


CertBuilder = Callable[[OperatorFamily], BoundCertificate]


def linear_ratio_builder(
    f: Callable[..., float],
    env: LinearEnvelope,
    g: GFunction,
    weights: WeightGrid | None = None,
    maps: PolyMap | None = None,
) -> CertBuilder:
    """Upper ratio certificate from a linear envelope, built per sampled family."""

    constants: dict = {}

    def build(family: OperatorFamily) -> BoundCertificate:
        w = weights or WeightGrid.uniform(family.counts)
        phi = maps or PolyMap.identity(family.dim)
        key = family.intervals
        if key not in constants:
            constants[key] = linear_ratio_constant("upper", g, env, key, "g_pos")
        return ratio_bound("upper", g, env, family, phi, w, "g_pos", f=f,
                           precomputed=constants[key])
    return build


def _trial(spec: EnsembleSpec, seed, f_builder, h_builder, query: TailQuery, mode: str, tol: float):
    family = sample_ensemble(EnsembleSpec(spec.dim, spec.boxes, spec.counts, seed, spec.commuting))
    try:
        cf = f_builder(family)
        ch = h_builder(family)
        comb = combine_operator_bounds(mode, cf, ch, tol)
    except LoewnerError:
        return "excluded", False, False
    if not (cf.holds and ch.holds and comb.holds):
        return "failed", False, False
    if float(np.linalg.eigvalsh(comb.lhs)[0]) < -tol:
        return "excluded", False, False
    lhs_event = ky_fan_norm(comb.lhs, query.ell) >= query.theta
    if mode == "add":
        rhs_event = ky_fan_norm(comb.rhs, query.ell) >= query.theta
    else:
        rhs_event = rescaled_product_event(comb.g_operator, comb.constant, query.theta, query.ell)
    return "ok", lhs_event, rhs_event


def mc_tail_check(
    spec: EnsembleSpec,
    f_builder: CertBuilder,
    h_builder: CertBuilder,
    query: TailQuery,
    *,
    jobs: int = 1,
    cert_tol: float = 1e-8,
) -> TailReport:
    """Paired Monte-Carlo comparison of the two tail probabilities.

    Every trial draws one family and evaluates both events on it. Trials
    whose certificate preconditions fail are excluded and counted.
    """
    if query.trials < 100:
        raise ValueError("mc_tail_check needs at least 100 trials")
    mode = "add" if query.statistic == "sum" else "mul"
    root = spec.seed if isinstance(spec.seed, np.random.SeedSequence) else np.random.SeedSequence(spec.seed)
    seeds = root.spawn(query.trials)

    def run(s):
        return _trial(spec, s, f_builder, h_builder, query, mode, cert_tol)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, seeds))
    else:
        results = [run(s) for s in seeds]
    ok = [(a, b) for status, a, b in results if status == "ok"]
    failed = sum(1 for status, _, _ in results if status == "failed")
    n = len(ok)
    violations = sum(1 for a, b in ok if a and not b)
    p_l = sum(a for a, _ in ok) / n if n else float("nan")
    p_r = sum(b for _, b in ok) / n if n else float("nan")
    se_l = math.sqrt(p_l * (1 - p_l) / n) if n else float("nan")
    se_r = math.sqrt(p_r * (1 - p_r) / n) if n else float("nan")
    holds = n > 0 and p_l <= p_r + 3 * math.sqrt(se_l**2 + se_r**2)
    return TailReport(query.trials, n, query.trials - n, failed, p_l, p_r, se_l, se_r,
                      bool(holds), violations, float(query.theta), int(query.ell), query.statistic)
