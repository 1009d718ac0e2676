"""Scenario config schema. Validation happens before anything runs."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .catalog import SchemaError

__all__ = ["SCHEMA_VERSION", "ScenarioConfig", "load_config", "parse_config"]

SCHEMA_VERSION = 1

Interval = tuple[float, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FunctionSpec(_Strict):
    name: str
    value: Optional[float] = None
    n_vars: Optional[int] = Field(default=None, ge=1)
    beta: Optional[list[float]] = None
    q: Optional[float] = None
    coeffs: Optional[dict[str, float]] = None
    path: Optional[str] = None

    def params(self) -> dict[str, Any]:
        return self.model_dump(exclude_none=True)


class GSpec(_Strict):
    kind: str
    beta: Optional[list[float]] = None
    q: Optional[float] = None
    function: Optional[FunctionSpec] = None


class MapSpec(_Strict):
    coeffs: dict[str, float]
    isometry: Optional[list[list[tuple[float, float]]]] = None


class LinearEnvelopeSpec(_Strict):
    a: list[float]
    b: float
    c: list[float]
    d: float


class SampledOperators(_Strict):
    dim: int = Field(ge=1, le=64)
    counts: list[int]
    spectra: Optional[list[Interval]] = None
    seed: Optional[int] = Field(default=None, ge=0)
    commuting: bool = True


class OperatorSource(_Strict):
    file: Optional[str] = None
    sampled: Optional[SampledOperators] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.file is None) == (self.sampled is None):
            raise ValueError("give exactly one of file or sampled")
        return self


class FSpec(_Strict):
    name: Literal["affine", "ratio"]
    alpha: float = 1.0


class BoundItem(_Strict):
    kind: Literal["fundamental", "affine", "ratio", "difference"]
    side: Literal["upper", "lower"] = "upper"
    alpha: float = 1.0
    F: Optional[FSpec] = None
    sign_case: Optional[Literal["g_pos", "g_neg"]] = None


class Tolerances(_Strict):
    cert_tol: float = Field(default=1e-8, gt=0)
    side_tol: float = Field(default=1e-9, gt=0)


class FitSection(_Strict):
    function: FunctionSpec
    box: list[Interval]
    epsilon: float = Field(gt=0)
    grid: Optional[int] = Field(default=None, ge=3)
    max_terms: int = Field(default=1024, ge=8)


class CertifySection(_Strict):
    function: FunctionSpec
    box: list[Interval]
    operators: OperatorSource
    g: GSpec
    bounds: list[BoundItem] = Field(min_length=1)
    epsilon: float = Field(default=0.1, gt=0)
    envelope_box: Optional[list[Interval]] = None
    linear_envelope: Optional[LinearEnvelopeSpec] = None
    weights: Optional[list[list[float]]] = None
    map: Optional[MapSpec] = None
    range_grid: int = Field(default=24, ge=3)
    conservative: bool = True


class DominationSpec(_Strict):
    u: float
    upsilon: float


class WBoundSection(_Strict):
    family: list[FunctionSpec] = Field(min_length=1)
    g: FunctionSpec
    interval: Interval
    weights: Optional[list[float]] = None
    map: Optional[MapSpec] = None
    dim: int = Field(default=4, ge=1)
    trials: int = Field(default=1000, ge=1)
    kappas: list[float] = Field(default_factory=lambda: [0.5, 2.0])
    domination: Optional[DominationSpec] = None
    constant: Optional[float] = None


class TailFunction(_Strict):
    function: FunctionSpec
    envelope: LinearEnvelopeSpec


class TailsSection(_Strict):
    dim: int = Field(ge=1, le=64)
    boxes: list[Interval]
    counts: list[int]
    commuting: bool = True
    f: TailFunction
    h: TailFunction
    g: GSpec
    theta: float
    ell: int = Field(ge=1)
    trials: int = Field(default=2000, ge=100)
    statistic: Literal["sum", "product"] = "sum"


Kind = Literal["fit-envelope", "certify", "wbound", "tails"]


class ScenarioConfig(_Strict):
    schema_version: Literal[1]
    kind: Kind
    seed: Optional[int] = Field(default=None, ge=0, lt=2**64)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    output: Optional[str] = None
    fit_envelope: Optional[FitSection] = Field(default=None, alias="fit-envelope")
    certify: Optional[CertifySection] = None
    wbound: Optional[WBoundSection] = None
    tails: Optional[TailsSection] = None

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @model_validator(mode="after")
    def _section_present(self):
        attr = self.kind.replace("-", "_")
        if getattr(self, attr) is None:
            raise ValueError(f"section {self.kind!r} is required for kind {self.kind!r}")
        for other in ("fit_envelope", "certify", "wbound", "tails"):
            if other != attr and getattr(self, other) is not None:
                raise ValueError(f"section {other.replace('_', '-')!r} does not belong to kind {self.kind!r}")
        return self

    @property
    def section(self):
        return getattr(self, self.kind.replace("-", "_"))


def _format_error(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "; ".join(lines)


def parse_config(doc: Any) -> ScenarioConfig:
    """Validate a decoded config document, raising SchemaError with field paths."""
    if not isinstance(doc, dict):
        raise SchemaError("<root>: config must be an object")
    if "schema_version" in doc and doc["schema_version"] != SCHEMA_VERSION:
        raise SchemaError(f"schema_version: unsupported version {doc['schema_version']!r}, "
                          f"expected {SCHEMA_VERSION}")
    try:
        return ScenarioConfig.model_validate(doc)
    except ValidationError as exc:
        raise SchemaError(_format_error(exc)) from None


def load_config(path: str | Path) -> tuple[ScenarioConfig, dict[str, Any]]:
    """Read and validate a JSON config file; returns the model and the raw document."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise SchemaError(f"<root>: cannot read config {p}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"<root>: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(doc), doc
