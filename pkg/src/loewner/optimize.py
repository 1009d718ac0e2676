"""Deterministic box-constrained extremization: dense grid plus coordinate polish."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from ._numeric import call_on_columns
from .errors import DomainError

__all__ = ["OptimizeConfig", "OptimizeResult", "box_optimize", "as_intervals"]


@dataclass(frozen=True)
class OptimizeConfig:
    grid_per_axis: int = 64
    max_grid_points: int = 2**18
    n_starts: int = 5
    max_sweeps: int = 8
    xtol: float = 1e-12

    def per_axis(self, n_free: int) -> int:
        per = self.grid_per_axis
        while per > 2 and per**max(n_free, 1) > self.max_grid_points:
            per -= 1
        return per


@dataclass(frozen=True)
class OptimizeResult:
    value: float
    argpoint: tuple[float, ...]
    provenance: dict[str, Any] = field(default_factory=dict)


def as_intervals(domain) -> list[tuple[float, float]]:
    """Accept a Box, SpectrumRange-like objects or ``(lo, hi)`` pairs."""
    if hasattr(domain, "intervals"):
        return [tuple(map(float, iv)) for iv in domain.intervals]
    out = []
    for item in domain:
        if hasattr(item, "lo") and hasattr(item, "hi"):
            lo, hi = float(item.lo), float(item.hi)
        else:
            lo, hi = map(float, item)
        if not lo <= hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        out.append((lo, hi))
    if not out:
        raise ValueError("domain has no variables")
    return out


def box_optimize(
    h: Callable[..., float],
    domain: Sequence,
    mode: str = "max",
    cfg: OptimizeConfig | None = None,
) -> OptimizeResult:
    """Numerical max or min of ``h`` over a closed box.

    The value is not a rigorous extremum. Among equal grid values the lowest
    grid index wins, and a polished point replaces the incumbent only when it
    is strictly better, so results are reproducible.
    """
    if mode not in ("max", "min"):
        raise ValueError(f"mode must be 'max' or 'min', got {mode!r}")
    cfg = cfg or OptimizeConfig()
    ivs = as_intervals(domain)
    n = len(ivs)
    free = [i for i, (lo, hi) in enumerate(ivs) if hi > lo]
    per = cfg.per_axis(len(free))
    axes = [np.linspace(lo, hi, per) if hi > lo else np.array([lo]) for lo, hi in ivs]
    mesh = np.meshgrid(*axes, indexing="ij")
    cols = [m.ravel() for m in mesh]
    vals = call_on_columns(h, *cols)
    if not np.all(np.isfinite(vals)):
        k = int(np.argmax(~np.isfinite(vals)))
        raise DomainError(f"objective is not finite at {tuple(float(c[k]) for c in cols)}")
    sign = 1.0 if mode == "max" else -1.0
    score = sign * vals
    order = np.argsort(-score, kind="stable")
    starts = order[: cfg.n_starts]

    def neg(x: np.ndarray) -> float:
        v = float(h(*map(float, x)))
        return -sign * v if np.isfinite(v) else np.inf

    best_x = np.array([c[starts[0]] for c in cols])
    best_s = float(score[starts[0]])
    steps = [(hi - lo) / (per - 1) if hi > lo else 0.0 for lo, hi in ivs]
    evals = 0
    for k in starts:
        x = np.array([c[k] for c in cols])
        s = float(score[k])
        for _ in range(cfg.max_sweeps):
            improved = False
            for i in free:
                lo = max(ivs[i][0], x[i] - steps[i])
                hi = min(ivs[i][1], x[i] + steps[i])

                def line(t: float, i: int = i) -> float:
                    y = x.copy()
                    y[i] = t
                    return neg(y)

                res = minimize_scalar(
                    line, bounds=(lo, hi), method="bounded",
                    options={"xatol": cfg.xtol * max(1.0, abs(hi - lo))},
                )
                evals += int(res.nfev)
                if np.isfinite(res.fun) and -res.fun > s + 1e-15 * max(1.0, abs(s)):
                    x[i] = res.x
                    s = -float(res.fun)
                    improved = True
            if not improved:
                break
        if s > best_s:
            best_s, best_x = s, x
    provenance = {
        "method": "grid+coordinate-descent",
        "grid_per_axis": per,
        "grid_points": int(vals.size),
        "starts": int(len(starts)),
        "polish_evaluations": evals,
        "rigorous": False,
    }
    return OptimizeResult(sign * best_s, tuple(map(float, best_x)), provenance)
