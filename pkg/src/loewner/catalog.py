"""Built-in scalar functions, g-kinds and F-forms addressable from configs."""
from __future__ import annotations

import difflib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .bounds import GFunction
from .envelope import SigmoidCombination
from .errors import LoewnerError

__all__ = ["SchemaError", "FUNCTIONS", "G_KINDS", "F_FORMS", "build_function",
           "build_g", "build_F", "list_catalog", "nearest"]


class SchemaError(LoewnerError, ValueError):
    """Config document does not match the schema."""


@dataclass(frozen=True)
class Entry:
    description: str
    required: tuple[str, ...]
    optional: tuple[str, ...]
    build: Callable[..., tuple[Callable[..., Any], int]]


def _affine_arg(beta):
    beta = [float(b) for b in beta]

    def t(*xs):
        return sum(b * np.asarray(x, dtype=float) for b, x in zip(beta, xs))
    return t, len(beta)


def _poly(coeffs, beta=(1.0,)):
    t, n = _affine_arg(beta)
    terms = [(int(e), float(a)) for e, a in coeffs.items()]
    if any(e < 0 for e, _ in terms):
        raise SchemaError("polynomial exponents must be nonnegative")

    def f(*xs):
        s = t(*xs)
        return sum(a * s**e for e, a in terms)
    return f, n


def _power(beta, q):
    t, n = _affine_arg(beta)
    return (lambda *xs: t(*xs) ** float(q)), n


def _log(beta):
    t, n = _affine_arg(beta)
    return (lambda *xs: np.log(t(*xs))), n


def _exp(beta):
    t, n = _affine_arg(beta)
    return (lambda *xs: np.exp(t(*xs))), n


def _sigmoid_file(path, base: Path | None = None):
    p = Path(path)
    if base is not None and not p.is_absolute():
        p = base / p
    try:
        psi = SigmoidCombination.from_json(p.read_text())
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"cannot load sigmoid combination from {p}: {exc}") from exc

    def f(*xs):
        arrs = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in xs))
        return psi.evaluate(np.stack([a.ravel() for a in arrs], axis=1)).reshape(arrs[0].shape)
    return f, psi.n_vars


FUNCTIONS: dict[str, Entry] = {
    "constant": Entry("c for every input", ("value",), ("n_vars",),
                      lambda value, n_vars=1: ((lambda *xs: float(value)), int(n_vars))),
    "exp": Entry("exp(sum beta_i x_i)", ("beta",), (), _exp),
    "geometric-mean": Entry("(prod x_i)^(1/n)", ("n_vars",), (),
                            lambda n_vars: ((lambda *xs: np.prod(np.asarray(xs, dtype=float), axis=0)
                                             ** (1.0 / len(xs))), int(n_vars))),
    "identity": Entry("x", (), (), lambda: ((lambda x: np.asarray(x, dtype=float)), 1)),
    "log": Entry("log(sum beta_i x_i)", ("beta",), (), _log),
    "polynomial": Entry("sum_e a_e (sum beta_i x_i)^e", ("coeffs",), ("beta",), _poly),
    "power": Entry("(sum beta_i x_i)^q", ("beta", "q"), (), _power),
    "product": Entry("prod x_i", ("n_vars",), (),
                     lambda n_vars: ((lambda *xs: np.prod(np.asarray(xs, dtype=float), axis=0)),
                                     int(n_vars))),
    "sigmoid-file": Entry("sigmoid combination loaded from a JSON file", ("path",), (), _sigmoid_file),
    "sum": Entry("sum x_i", ("n_vars",), (),
                 lambda n_vars: ((lambda *xs: np.sum(np.asarray(xs, dtype=float), axis=0)),
                                 int(n_vars))),
}

G_KINDS: dict[str, str] = {
    "custom": "any catalog function, lifted by joint spectral calculus",
    "exp": "exp(sum beta_i x_i)",
    "log": "log(sum beta_i x_i), needs sum beta_i x_i > 0",
    "power": "(sum beta_i x_i)^q, needs sum beta_i x_i > 0",
}

F_FORMS: dict[str, str] = {
    "affine": "F(u, v) = u - alpha v",
    "ratio": "F(u, v) = u / v, for v > 0",
}


def nearest(name: str, choices) -> str:
    match = difflib.get_close_matches(name, list(choices), n=1, cutoff=0.0)
    return match[0] if match else ""


def _unknown(kind: str, name: str, choices, path: str) -> SchemaError:
    return SchemaError(f"{path}: unknown {kind} {name!r}; did you mean {nearest(name, choices)!r}?")


def build_function(spec: dict[str, Any], path: str = "function",
                   base: Path | None = None) -> tuple[Callable[..., Any], int]:
    """Resolve ``{"name": ..., params...}`` against the catalog."""
    spec = dict(spec)
    name = spec.pop("name", None)
    if not isinstance(name, str):
        raise SchemaError(f"{path}.name: required string")
    if name not in FUNCTIONS:
        raise _unknown("function", name, FUNCTIONS, f"{path}.name")
    entry = FUNCTIONS[name]
    params = {k: v for k, v in spec.items() if v is not None}
    for k in params:
        if k not in entry.required + entry.optional:
            raise SchemaError(f"{path}.{k}: unexpected parameter for {name!r}")
    for k in entry.required:
        if k not in params:
            raise SchemaError(f"{path}.{k}: required for {name!r}")
    if name == "sigmoid-file":
        params["base"] = base
    return entry.build(**params)


def build_g(spec: dict[str, Any], path: str = "g", base: Path | None = None) -> GFunction:
    kind = spec.get("kind")
    if kind not in G_KINDS:
        raise _unknown("g kind", str(kind), G_KINDS, f"{path}.kind")
    try:
        if kind == "custom":
            if spec.get("function") is None:
                raise SchemaError(f"{path}.function: required for custom g")
            f, n = build_function(spec["function"], f"{path}.function", base)
            return GFunction.custom(f, n, spec["function"].get("name", ""))
        if spec.get("beta") is None:
            raise SchemaError(f"{path}.beta: required for {kind} g")
        if kind == "power":
            if spec.get("q") is None:
                raise SchemaError(f"{path}.q: required for power g")
            return GFunction.power(spec["beta"], spec["q"])
        return GFunction.log(spec["beta"]) if kind == "log" else GFunction.exp(spec["beta"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"{path}: {exc}") from exc


def build_F(spec: dict[str, Any], path: str = "F") -> Callable[[float, float], float]:
    name = spec.get("name")
    if name not in F_FORMS:
        raise _unknown("F form", str(name), F_FORMS, f"{path}.name")
    if name == "affine":
        alpha = float(spec.get("alpha", 1.0))
        return lambda u, v: u - alpha * v
    return lambda u, v: u / v


def list_catalog() -> str:
    lines = ["functions:"]
    width = max(map(len, FUNCTIONS))
    for name, entry in FUNCTIONS.items():
        params = ", ".join(list(entry.required) + [f"[{p}]" for p in entry.optional])
        lines.append(f"  {name.ljust(width)}  {entry.description}" + (f"  ({params})" if params else ""))
    lines.append("g-kinds:")
    for name, desc in G_KINDS.items():
        lines.append(f"  {name.ljust(width)}  {desc}")
    lines.append("F-forms:")
    for name, desc in F_FORMS.items():
        lines.append(f"  {name.ljust(width)}  {desc}")
    return "\n".join(lines) + "\n"


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def dumps(doc: Any) -> str:
    """Deterministic JSON: sorted keys, shortest-repr floats, non-finite as strings."""
    def clean(x):
        if isinstance(x, float) and not math.isfinite(x):
            return repr(x)
        if isinstance(x, dict):
            return {str(k): clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        if isinstance(x, (np.floating, np.integer, np.bool_)):
            return clean(x.item())
        return x
    return json.dumps(clean(doc), indent=2, sort_keys=True, default=_json_default) + "\n"
