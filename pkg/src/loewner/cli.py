"""Batch command line front-end: ``loewner <subcommand> --config scenario.json``."""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy

from . import __version__
from .bounds import (
    BoundContext,
    OperatorFamily,
    WeightGrid,
    affine_bound,
    difference_bound,
    fundamental_bound,
    ratio_bound,
)
from .catalog import SchemaError, build_F, build_function, build_g, dumps, list_catalog
from .config import ScenarioConfig, load_config
from .envelope import FitConfig, LinearEnvelope, fit_envelopes, linear_envelope_verify, verify_envelope
from .errors import LoewnerError
from .opmaps import PolyMap
from .spectral import Box
from .tails import EnsembleSpec, TailQuery, linear_ratio_builder, mc_tail_check, sample_ensemble
from .wbound import WBoundSpec, domination_check, scaling_check, verify_w_bound, w_bound_constant

__all__ = ["main", "run", "EXIT_OK", "EXIT_FAILED", "EXIT_SCHEMA", "EXIT_PRECONDITION", "EXIT_INTERNAL"]

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_SCHEMA = 2
EXIT_PRECONDITION = 3
EXIT_INTERNAL = 4

SUBCOMMANDS = ("fit-envelope", "certify", "wbound", "tails", "catalog")


def _item(item_id: str, holds: bool, value=None, witness=None, detail=None) -> dict[str, Any]:
    return {"id": item_id, "holds": bool(holds), "value": value, "witness": witness,
            "detail": detail or {}}


def _map_from_spec(spec, dim: int) -> PolyMap:
    if spec is None:
        return PolyMap.identity(dim)
    doc = spec.model_dump(exclude_none=True)
    if "isometry" not in doc:
        doc["isometry"] = [[(1.0 if i == j else 0.0, 0.0) for j in range(dim)] for i in range(dim)]
    return PolyMap.from_dict(doc)


def _linear_env(spec, f) -> LinearEnvelope:
    return LinearEnvelope(tuple(spec.a), spec.b, tuple(spec.c), spec.d, f=f)


# fit-envelope ---------------------------------------------------------------

def _run_fit(cfg: ScenarioConfig, seed: int, ov: dict, base: Path, jobs: int) -> list[dict]:
    sec = cfg.fit_envelope
    f, n = build_function(sec.function.params(), "fit-envelope.function", base)
    box = Box(sec.box)
    if box.n != n:
        raise SchemaError(f"fit-envelope.box: {box.n} intervals for a {n}-variable function")
    grid = ov.get("grid") or sec.grid or FitConfig.grid_per_axis
    fit_cfg = FitConfig(grid_per_axis=grid, max_terms=sec.max_terms, seed=seed)
    pair = fit_envelopes(f, box, sec.epsilon, fit_cfg)
    check_grid = 2 * fit_cfg.fit_grid(n) - 1
    rep = verify_envelope(f, pair, check_grid, side_tol=cfg.tolerances.side_tol)
    detail = {
        "epsilon": sec.epsilon,
        "achieved_gap_lower": pair.achieved_gap_lower,
        "achieved_gap_upper": pair.achieved_gap_upper,
        "schedule": list(pair.schedule),
        "gap_history": list(pair.gap_history),
        "verification_grid": pair.verification_grid,
        "check_grid": check_grid,
        "max_upper_gap": rep.max_upper_gap,
        "max_lower_gap": rep.max_lower_gap,
        "violation_count": rep.violation_count,
        "violations": [{"kind": k, "point": list(p), "amount": a} for k, p, a in rep.violations],
        "lower": pair.lower.to_dict(),
        "upper": pair.upper.to_dict(),
    }
    return [_item("envelope", rep.ok, value=max(pair.achieved_gap_lower, pair.achieved_gap_upper),
                  detail=detail)]


# certify --------------------------------------------------------------------

def _load_operator_file(path: Path) -> list[tuple[np.ndarray, ...]]:
    try:
        doc = json.loads(path.read_text())
        axes = []
        for a, axis in enumerate(doc["axes"]):
            mats = []
            for k, rows in enumerate(axis):
                M = np.array([[complex(re, im) for re, im in row] for row in rows])
                mats.append(M.real if np.all(M.imag == 0) else M)
            axes.append(tuple(mats))
        return axes
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"certify.operators.file: cannot load operators from {path}: {exc}") from None


def _family(sec, seed: int, base: Path) -> OperatorFamily:
    src = sec.operators
    if src.sampled is not None:
        s = src.sampled
        spectra = s.spectra or sec.box
        if len(spectra) != len(s.counts):
            raise SchemaError("certify.operators.sampled.counts: one count per axis required")
        fam = sample_ensemble(EnsembleSpec(s.dim, tuple(map(tuple, spectra)), tuple(s.counts),
                                           s.seed if s.seed is not None else seed, s.commuting))
        return OperatorFamily(fam.axes, tuple(map(tuple, sec.box)), commuting=s.commuting)
    p = Path(src.file)
    axes = _load_operator_file(p if p.is_absolute() else base / p)
    return OperatorFamily(tuple(axes), tuple(map(tuple, sec.box)), commuting=True)


def _run_certify(cfg: ScenarioConfig, seed: int, ov: dict, base: Path, jobs: int) -> list[dict]:
    sec = cfg.certify
    tol = cfg.tolerances.cert_tol
    f, n = build_function(sec.function.params(), "certify.function", base)
    if len(sec.box) != n:
        raise SchemaError(f"certify.box: {len(sec.box)} intervals for a {n}-variable function")
    g = build_g(sec.g.model_dump(exclude_none=True), "certify.g", base)
    family = _family(sec, seed, base)
    phi = _map_from_spec(sec.map, family.dim)
    if sec.weights is not None:
        if len(sec.weights) != n:
            raise SchemaError("certify.weights: one weight list per axis required")
        w = WeightGrid(tuple(np.asarray(x, dtype=float) for x in sec.weights))
    else:
        w = WeightGrid.uniform(family.counts)
    lo = min(a for a, _ in sec.box)
    hi = max(b for _, b in sec.box)
    env_box = Box(sec.envelope_box) if sec.envelope_box else Box.cube(lo, hi, n)
    grid = ov.get("grid")
    pair = fit_envelopes(f, env_box, sec.epsilon,
                         FitConfig(seed=seed, **({"grid_per_axis": grid} if grid else {})))
    ctx = BoundContext(pair, family, phi, w, range_grid=sec.range_grid,
                       conservative=sec.conservative, cert_tol=tol)
    lin = None
    if sec.linear_envelope is not None:
        lin = _linear_env(sec.linear_envelope, f)
        rep = linear_envelope_verify(f, lin, family.box, 33)
        if rep.violation_count:
            raise SchemaError("certify.linear_envelope: envelope is not one-sided on the box")

    def one(item):
        env = lin if lin is not None else pair
        if item.kind == "fundamental":
            F = build_F((item.F.model_dump() if item.F else {"name": "affine", "alpha": 1.0}))
            return fundamental_bound(item.side, F, g, pair, family, phi, w, context=ctx)
        if item.kind == "affine":
            return affine_bound(item.side, item.alpha, g, pair, family, phi, w, context=ctx)
        if item.kind == "ratio":
            return ratio_bound(item.side, g, env, family, phi, w, item.sign_case, f=f, context=ctx)
        return difference_bound(item.side, g, env, family, phi, w, f=f, context=ctx)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            certs = list(pool.map(one, sec.bounds))
    else:
        certs = [one(b) for b in sec.bounds]
    return [_item(c.inequality_id, c.holds, value=c.constant, witness=c.witness, detail=c.to_dict())
            for c in certs]


# wbound ---------------------------------------------------------------------

def _run_wbound(cfg: ScenarioConfig, seed: int, ov: dict, base: Path, jobs: int) -> list[dict]:
    sec = cfg.wbound
    fams, names = [], []
    for i, fs in enumerate(sec.family):
        fn, n = build_function(fs.params(), f"wbound.family.{i}", base)
        if n != 1:
            raise SchemaError(f"wbound.family.{i}: W-bound functions must be univariate")
        fams.append(fn)
        names.append(fs.name)
    g, n = build_function(sec.g.params(), "wbound.g", base)
    if n != 1:
        raise SchemaError("wbound.g: must be univariate")
    phi = _map_from_spec(sec.map, sec.dim)
    spec = WBoundSpec(tuple(fams), g, sec.interval[0], sec.interval[1], phi,
                      tuple(sec.weights) if sec.weights else None, tuple(names))
    res = w_bound_constant(spec)
    constant = sec.constant if sec.constant is not None else res.constant
    trials = ov.get("trials") or sec.trials
    rep = verify_w_bound(spec, trials, seed, constant=constant, cert_tol=cfg.tolerances.cert_tol)
    items = [
        _item("wbound/constant", np.isfinite(res.constant), value=res.constant,
              detail={"arg_x": res.arg_x, "provenance": res.provenance,
                      "chords": [{"a": c.a, "b": c.b} for c in res.per_function_chords]}),
        _item("wbound/verify", rep.all_pass, value=constant, witness=rep.worst_witness,
              detail={"trials": rep.trials, "pass_count": rep.pass_count,
                      "failures": [{"trial": t, "witness": wv} for t, wv in rep.failures]}),
    ]
    for kappa in sec.kappas:
        s = scaling_check(spec, kappa)
        items.append(_item(f"wbound/scaling/{kappa!r}", s.holds, value=s.scaled_constant,
                           detail={"expected": s.expected, "abs_error": s.abs_error,
                                   "same_argmax": s.same_argmax}))
    if sec.domination is not None:
        d = domination_check(spec, sec.domination.u, sec.domination.upsilon)
        items.append(_item("wbound/domination", d.holds, value=d.domination_factor,
                           detail={"u": d.u, "upsilon": d.upsilon, "bound": d.bound,
                                   "base_constant": d.base_constant,
                                   "shifted_constant": d.shifted_constant,
                                   "chained_constant": d.chained_constant}))
    return items


# tails ----------------------------------------------------------------------

def _run_tails(cfg: ScenarioConfig, seed: int, ov: dict, base: Path, jobs: int) -> list[dict]:
    sec = cfg.tails
    g = build_g(sec.g.model_dump(exclude_none=True), "tails.g", base)
    boxes = tuple(map(tuple, sec.boxes))
    builders = []
    for name, tf in (("f", sec.f), ("h", sec.h)):
        fn, n = build_function(tf.function.params(), f"tails.{name}.function", base)
        if n != len(boxes):
            raise SchemaError(f"tails.{name}.function: {n} variables for {len(boxes)} axes")
        env = _linear_env(tf.envelope, fn)
        rep = linear_envelope_verify(fn, env, Box(boxes), 33)
        if rep.violation_count:
            raise SchemaError(f"tails.{name}.envelope: envelope is not one-sided on the boxes")
        builders.append(linear_ratio_builder(fn, env, g))
    trials = ov.get("trials") or sec.trials
    spec = EnsembleSpec(sec.dim, boxes, tuple(sec.counts), seed, sec.commuting)
    query = TailQuery(sec.theta, sec.ell, trials, sec.statistic)
    rep = mc_tail_check(spec, builders[0], builders[1], query, jobs=jobs,
                        cert_tol=cfg.tolerances.cert_tol)
    holds = rep.direction_holds and rep.domination_violations == 0 and rep.certificate_failures == 0
    return [_item(f"tails/{sec.statistic}", holds, value=rep.p_lhs - rep.p_rhs, detail=rep.to_record())]


RUNNERS = {"fit-envelope": _run_fit, "certify": _run_certify, "wbound": _run_wbound, "tails": _run_tails}


# report assembly ------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def render_table(report: dict[str, Any]) -> str:
    header = ("item", "status", "value", "witness")
    rows = [(it["id"], "PASS" if it["holds"] else "FAIL", _fmt(it["value"]), _fmt(it["witness"]))
            for it in report.get("items", [])]
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(4)]
    lines = ["  ".join(c.ljust(wd) for c, wd in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * wd for wd in widths))
    lines += ["  ".join(c.ljust(wd) for c, wd in zip(r, widths)).rstrip() for r in rows]
    lines.append(f"status: {report['status']} (exit {report['exit_code']})")
    for fail in report.get("failures", []):
        lines.append(f"failed: {fail['id']} witness={_fmt(fail['witness'])}")
    if report.get("error"):
        lines.append(f"error: {report['error']}")
    return "\n".join(lines) + "\n"


def resolve_seed(cli_seed: int | None, config_seed: int | None) -> int:
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get("LOEWNER_SEED")
    if env is not None:
        try:
            value = int(env)
        except ValueError:
            raise SchemaError(f"LOEWNER_SEED: not an integer: {env!r}") from None
        if not 0 <= value < 2**64:
            raise SchemaError("LOEWNER_SEED: must be in [0, 2^64)")
        return value
    return config_seed if config_seed is not None else 0


def run(config_path: str | Path, overrides: dict[str, Any] | None = None,
        subcommand: str | None = None) -> tuple[int, dict[str, Any]]:
    """Execute one scenario. Returns ``(exit_code, report)``; never raises."""
    ov = {k: v for k, v in (overrides or {}).items() if v is not None}
    report: dict[str, Any] = {
        "versions": {"loewner": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "config_path": str(config_path),
        "overrides": {k: v for k, v in ov.items() if k not in ("out", "jobs")},
    }
    try:
        cfg, raw = load_config(config_path)
        report["scenario"] = raw
        if subcommand is not None and subcommand != cfg.kind:
            raise SchemaError(f"kind: config is {cfg.kind!r} but subcommand is {subcommand!r}")
        if "tol" in ov:
            cfg.tolerances.cert_tol = float(ov["tol"])
        seed = resolve_seed(ov.get("seed"), cfg.seed)
        report["master_seed"] = seed
        report["kind"] = cfg.kind
        base = Path(config_path).resolve().parent
        items = RUNNERS[cfg.kind](cfg, seed, ov, base, int(ov.get("jobs", 1)))
    except SchemaError as exc:
        return _finish(report, EXIT_SCHEMA, error=f"schema: {exc}")
    except LoewnerError as exc:
        return _finish(report, EXIT_PRECONDITION, error=f"{type(exc).__name__}: {exc}")
    except Exception as exc:  # noqa: BLE001
        return _finish(report, EXIT_INTERNAL, error=f"internal {type(exc).__name__}: {exc}")
    report["items"] = items
    failures = [{"id": it["id"], "witness": it["witness"], "value": it["value"]}
                for it in items if not it["holds"]]
    report["failures"] = failures
    return _finish(report, EXIT_FAILED if failures else EXIT_OK)


def _finish(report: dict[str, Any], code: int, error: str | None = None):
    report["exit_code"] = code
    report["status"] = {EXIT_OK: "ok", EXIT_FAILED: "failed"}.get(code, "error")
    if error is not None:
        report["error"] = error
    return code, report


def write_report(report: dict[str, Any], out: str | Path) -> tuple[Path, Path]:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dumps(report))
    table = out.with_suffix(".txt")
    table.write_text(render_table(report))
    return out, table


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loewner", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        if name == "catalog":
            continue
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", metavar="PATH", help="JSON report path; a .txt table is written alongside")
        p.add_argument("--seed", type=int, metavar="U64")
        p.add_argument("--jobs", type=int, default=1, metavar="N")
        p.add_argument("--tol", type=float, metavar="FLOAT", help="certificate tolerance")
        p.add_argument("--grid", type=int, metavar="N", help="envelope fitting grid per axis")
        p.add_argument("--trials", type=int, metavar="N")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if args.command == "catalog":
        sys.stdout.write(list_catalog())
        return EXIT_OK
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be in [0, 2^64)", file=sys.stderr)
        return EXIT_SCHEMA
    if args.jobs < 1:
        print("error: --jobs must be positive", file=sys.stderr)
        return EXIT_SCHEMA
    start = time.perf_counter()
    overrides = {"seed": args.seed, "jobs": args.jobs if args.jobs > 1 else None, "tol": args.tol,
                 "grid": args.grid, "trials": args.trials}
    code, report = run(args.config, overrides, subcommand=args.command)
    out = args.out or (report.get("scenario") or {}).get("output")
    if out:
        p = Path(out)
        if not p.is_absolute() and not args.out:
            p = Path(args.config).resolve().parent / p
        write_report(report, p)
    sys.stdout.write(render_table(report))
    print(f"wall time: {time.perf_counter() - start:.3f} s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
