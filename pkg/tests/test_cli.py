import json

import numpy as np
import pytest

from loewner import cli
from loewner.catalog import FUNCTIONS, G_KINDS, build_function, list_catalog
from loewner.cli import main, run
from loewner.config import parse_config


def write(tmp_path, doc, name="scenario.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def certify_doc(**over):
    doc = {
        "schema_version": 1,
        "kind": "certify",
        "seed": 3,
        "certify": {
            "function": {"name": "constant", "value": 1.5, "n_vars": 2},
            "box": [[1.0, 2.0], [1.0, 2.0]],
            "operators": {"sampled": {"dim": 3, "counts": [2, 1]}},
            "g": {"kind": "power", "beta": [0.5, 0.5], "q": 1},
            "bounds": [{"kind": "affine", "side": "upper"}, {"kind": "affine", "side": "lower"},
                       {"kind": "difference"}],
        },
    }
    doc["certify"].update(over)
    return doc


WBOUND = {
    "schema_version": 1,
    "kind": "wbound",
    "wbound": {
        "family": [{"name": "power", "beta": [1.0], "q": 2}],
        "g": {"name": "identity"},
        "interval": [1.0, 2.0],
        "trials": 200,
    },
}


def test_certify_constant_function(tmp_path):
    code, report = run(write(tmp_path, certify_doc()))
    assert code == 0, report.get("error")
    assert report["status"] == "ok" and len(report["items"]) == 3
    for item in report["items"]:
        assert item["holds"] and abs(item["witness"]) < 1e-8
        assert "provenance" in item["detail"]


def test_wbound_constant(tmp_path):
    code, report = run(write(tmp_path, WBOUND))
    assert code == 0
    const = next(i for i in report["items"] if i["id"] == "wbound/constant")
    assert const["value"] == pytest.approx(2.0, abs=1e-9)
    assert [i["id"] for i in report["items"]][2:] == ["wbound/scaling/0.5", "wbound/scaling/2.0"]


def test_failing_certificate_exit(tmp_path):
    doc = json.loads(json.dumps(WBOUND))
    doc["wbound"]["constant"] = 1.0
    out = tmp_path / "out" / "r.json"
    code = main(["wbound", "--config", str(write(tmp_path, doc)), "--out", str(out)])
    assert code == 1
    report = json.loads(out.read_text())
    assert [f["id"] for f in report["failures"]] == ["wbound/verify"]
    assert report["failures"][0]["witness"] < 0
    assert "FAIL" in out.with_suffix(".txt").read_text()


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d["wbound"].__setitem__("interval", [1.0, "x"]), "wbound.interval.1"),
    (lambda d: d["wbound"].__setitem__("colour", 1), "wbound.colour"),
    (lambda d: d.pop("schema_version"), "schema_version"),
    (lambda d: d.__setitem__("schema_version", 7), "schema_version"),
    (lambda d: d["wbound"]["family"][0].__setitem__("bogus", 2), "wbound.family.0.bogus"),
    (lambda d: d.__setitem__("tails", {}), "tails"),
])
def test_malformed_config_exit_2(tmp_path, mutate, path):
    doc = json.loads(json.dumps(WBOUND))
    mutate(doc)
    code, report = run(write(tmp_path, doc))
    assert code == 2
    assert path in report["error"]


def test_invalid_json_and_missing_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(bad)[0] == 2
    assert run(tmp_path / "missing.json")[0] == 2


def test_unknown_name_nearest_match(tmp_path):
    doc = json.loads(json.dumps(WBOUND))
    doc["wbound"]["family"][0]["name"] = "powr"
    code, report = run(write(tmp_path, doc))
    assert code == 2
    assert "'power'" in report["error"] and "wbound.family.0.name" in report["error"]
    doc = certify_doc(g={"kind": "lgo", "beta": [1.0, 1.0]})
    code, report = run(write(tmp_path, doc))
    assert code == 2 and "'log'" in report["error"]


def test_subcommand_must_match_kind(tmp_path):
    assert main(["tails", "--config", str(write(tmp_path, WBOUND))]) == 2


def test_precondition_exit_3(tmp_path):
    doc = certify_doc(bounds=[{"kind": "ratio", "side": "upper"}],
                      g={"kind": "log", "beta": [0.5, 0.5]},
                      function={"name": "constant", "value": 1.0, "n_vars": 2})
    code, report = run(write(tmp_path, doc))
    assert code == 3 and report["status"] == "error"


def test_internal_error_exit_4(tmp_path, monkeypatch):
    def boom(*args):
        raise RuntimeError("unexpected")
    monkeypatch.setitem(cli.RUNNERS, "wbound", boom)
    code, report = run(write(tmp_path, WBOUND))
    assert code == 4 and "unexpected" in report["error"]


def test_catalog_listing(capsys):
    text = list_catalog()
    for kind in ("power", "log", "exp"):
        assert f"  {kind} " in text.split("g-kinds:")[1]
    assert text == list_catalog()
    assert main(["catalog"]) == 0
    assert capsys.readouterr().out == text


def test_catalog_round_trip():
    examples = {
        "constant": {"value": 2.0},
        "exp": {"beta": [1.0, 0.5]},
        "geometric-mean": {"n_vars": 3},
        "identity": {},
        "log": {"beta": [1.0]},
        "polynomial": {"coeffs": {"0": 1.0, "2": 0.5}},
        "power": {"beta": [1.0], "q": 2.0},
        "product": {"n_vars": 2},
        "sum": {"n_vars": 2},
    }
    assert set(examples) == set(FUNCTIONS) - {"sigmoid-file"}
    for name, params in examples.items():
        doc = dict(WBOUND, wbound=dict(WBOUND["wbound"], g={"name": name, **params}))
        cfg = parse_config(doc)
        f, n = build_function(cfg.wbound.g.params())
        x = np.full(n, 1.5)
        assert np.isfinite(f(*x))
    assert build_function({"name": "polynomial", "coeffs": {"0": 1.0, "2": 0.5}})[0](2.0) == 3.0
    assert set(G_KINDS) >= {"power", "log", "exp"}


def test_sigmoid_file_function(tmp_path):
    from loewner import SigmoidCombination
    psi = SigmoidCombination.from_terms(1, [(2.0, [1.0], 0.0)])
    (tmp_path / "psi.json").write_text(psi.to_json())
    f, n = build_function({"name": "sigmoid-file", "path": "psi.json"}, base=tmp_path)
    assert n == 1 and f(0.0) == pytest.approx(1.0)


def test_operator_file_source(tmp_path):
    ops = {"axes": [[[[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [2.0, 0.0]]],
                     [[[1.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.5, 0.0]]]]]}
    (tmp_path / "ops.json").write_text(json.dumps(ops))
    doc = certify_doc(box=[[1.0, 2.0]], operators={"file": "ops.json"},
                      function={"name": "identity"}, g={"kind": "power", "beta": [1.0], "q": 1},
                      bounds=[{"kind": "affine"}, {"kind": "ratio"}])
    code, report = run(write(tmp_path, doc))
    assert code == 0, report.get("error")


def test_fit_envelope_scenario(tmp_path):
    doc = {"schema_version": 1, "kind": "fit-envelope",
           "fit-envelope": {"function": {"name": "identity"}, "box": [[0.0, 1.0]], "epsilon": 0.05}}
    code, report = run(write(tmp_path, doc))
    assert code == 0
    detail = report["items"][0]["detail"]
    assert detail["violation_count"] == 0 and detail["upper"]["n_vars"] == 1


def test_tails_scenario(tmp_path):
    doc = {"schema_version": 1, "kind": "tails", "seed": 2,
           "tails": {"dim": 4, "boxes": [[1.0, 2.0]], "counts": [2],
                     "f": {"function": {"name": "identity"}, "envelope": {"a": [1.0], "b": 0.0, "c": [1.0], "d": 0.0}},
                     "h": {"function": {"name": "identity"}, "envelope": {"a": [1.0], "b": 0.0, "c": [1.0], "d": 0.0}},
                     "g": {"kind": "power", "beta": [1.0], "q": 1}, "theta": 6.0, "ell": 2, "trials": 100}}
    code, report = run(write(tmp_path, doc))
    assert code == 0
    assert report["items"][0]["detail"]["trial_count"] == 100


def test_tails_rejects_bad_envelope(tmp_path):
    doc = {"schema_version": 1, "kind": "tails",
           "tails": {"dim": 4, "boxes": [[1.0, 2.0]], "counts": [2],
                     "f": {"function": {"name": "identity"}, "envelope": {"a": [1.0], "b": 0.0, "c": [1.0], "d": -1.0}},
                     "h": {"function": {"name": "identity"}, "envelope": {"a": [1.0], "b": 0.0, "c": [1.0], "d": 0.0}},
                     "g": {"kind": "power", "beta": [1.0], "q": 1}, "theta": 6.0, "ell": 2, "trials": 100}}
    assert run(write(tmp_path, doc))[0] == 2


def test_determinism_and_seed_precedence(tmp_path, monkeypatch):
    cfg = write(tmp_path, certify_doc())
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        assert main(["certify", "--config", str(cfg), "--out", str(out), "--jobs", str(k + 1)]) == 0
        outs.append(out)
    assert outs[0].read_bytes() == outs[1].read_bytes()
    assert outs[0].with_suffix(".txt").read_bytes() == outs[1].with_suffix(".txt").read_bytes()
    assert json.loads(outs[0].read_text())["master_seed"] == 3
    monkeypatch.setenv("LOEWNER_SEED", "11")
    assert run(cfg)[1]["master_seed"] == 11
    assert run(cfg, {"seed": 5})[1]["master_seed"] == 5
    monkeypatch.setenv("LOEWNER_SEED", "abc")
    assert run(cfg)[0] == 2


def test_overrides(tmp_path):
    doc = json.loads(json.dumps(WBOUND))
    code, report = run(write(tmp_path, doc), {"trials": 7})
    verify = next(i for i in report["items"] if i["id"] == "wbound/verify")
    assert verify["detail"]["trials"] == 7
    assert report["overrides"] == {"trials": 7}


def test_bad_flags():
    assert main(["certify"]) == 2
    assert main(["nope"]) == 2


def test_table_alignment(tmp_path):
    code, report = run(write(tmp_path, certify_doc()))
    lines = cli.render_table(report).splitlines()
    header, rule = lines[0], lines[1]
    cols = [len(c) for c in rule.split("  ")]
    assert header.startswith("item") and len(cols) == 4
    assert lines[-1].startswith("status: ok")
