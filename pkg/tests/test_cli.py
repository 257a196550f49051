import csv
import json

import numpy as np
import pytest

from nlframe import __version__, cli, certify
from nlframe.config import load_config, validate
from nlframe.errors import InvalidInputError
from nlframe.experiment import run_experiment
from nlframe.reports import TRACE_COLUMNS, canonical_json, config_hash
from nlframe.spaces import write_matrix, write_vector

PROVENANCES = {certify.EXACT, certify.SAMPLED_LOWER, certify.SAMPLED_UPPER, certify.FITTED, certify.FORMULA}
EXAMPLES = ["examples/e2_beta.toml", "examples/sparse_linear.toml", "examples/vc_graded4.toml"]


def _provenances_ok(report):
    for c in report.get("constants", {}).values():
        parts = [p.split(": ")[-1] for p in c["provenance"].split("; ")]
        assert all(p in PROVENANCES for p in parts), c


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


@pytest.mark.parametrize("path", EXAMPLES)
def test_bundled_examples_run(tmp_path, path, clean_seed_env):
    assert cli.main(["run", path, "--out-dir", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert report["config_hash"] == manifest["config_hash"]
    assert "run_seconds" in manifest["timings"] and "timings" not in report
    assert (tmp_path / "summary.md").exists()
    _provenances_ok(report)


def test_certify_flags(tmp_path, capsys):
    out = tmp_path / "r.json"
    code = cli.main(["certify", "--map", "e_map:p=inf,eps=0", "--plan", '{"box_radius": 12, "n_pts": 400}',
                     "--constants", "beta_FT,alpha_F", "--out", str(out)])
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["constants"]["alpha_F"]["value"] == pytest.approx(1.0, abs=1e-6)
    assert rep["constants"]["beta_FT"]["provenance"] == certify.SAMPLED_LOWER
    assert "| alpha_F |" in capsys.readouterr().out


def test_certify_unknown_constant():
    assert cli.main(["certify", "--map", "e_map:p=2", "--constants", "gamma"]) == 2


def test_solve_with_trace(tmp_path):
    T = np.array([[2.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    x = np.array([0.4, -0.3])
    write_matrix(tmp_path / "T.csv", T)
    write_vector(tmp_path / "z.csv", T @ x)
    write_vector(tmp_path / "x.csv", x)
    code = cli.main(["solve", "--algo", "left-inverse", "--map", "linear", "--operator", str(tmp_path / "T.csv"),
                     "--data", str(tmp_path / "z.csv"), "--truth", str(tmp_path / "x.csv"),
                     "--out", str(tmp_path / "r.json"), "--trace", str(tmp_path / "t.csv")])
    assert code == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["result"]["error_l2"] <= 1e-10
    with open(tmp_path / "t.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == TRACE_COLUMNS
    iters = [int(r[0]) for r in rows[1:]]
    assert iters == sorted(iters) and iters[0] == 1
    _provenances_ok(rep)


def test_solve_refusal_and_divergence_exit_codes(tmp_path):
    write_vector(tmp_path / "z.csv", [1.0, 0.0])
    assert cli.main(["solve", "--algo", "van-cittert", "--map", "e_map:p=2,eps=0",
                     "--data", str(tmp_path / "z.csv")]) == 3
    write_matrix(tmp_path / "I.csv", np.eye(2))
    write_vector(tmp_path / "y.csv", [1.0, 1.0])
    assert cli.main(["solve", "--algo", "van-cittert", "--map", "linear", "--operator", str(tmp_path / "I.csv"),
                     "--data", str(tmp_path / "y.csv"), "--mu", "3", "--force"]) == 4


def test_recover_and_infeasible(tmp_path):
    write_matrix(tmp_path / "I.csv", np.eye(3))
    write_vector(tmp_path / "z.csv", [3.0, 0.05, 0.0])
    write_vector(tmp_path / "x.csv", [3.0, 0.0, 0.0])
    out = tmp_path / "r.json"
    code = cli.main(["recover", "--map", "linear", "--operator", str(tmp_path / "I.csv"), "--triple",
                     "classical:n=3,s=1", "--data", str(tmp_path / "z.csv"), "--truth", str(tmp_path / "x.csv"),
                     "--eps", "0.1", "--out", str(out)])
    assert code == 0
    rep = json.loads(out.read_text())
    b = rep["bounds"]["error_H"]
    assert b["measured"] <= b["bound"]
    _provenances_ok(rep)
    write_matrix(tmp_path / "P.csv", np.diag([1.0, 1.0, 0.0]))
    write_vector(tmp_path / "w.csv", [0.0, 0.0, 1.0])
    assert cli.main(["recover", "--map", "linear", "--operator", str(tmp_path / "P.csv"), "--triple",
                     "classical:n=3,s=1", "--data", str(tmp_path / "w.csv"), "--eps", "0.1", "--no-bounds"]) == 4


def test_triple_verify(tmp_path):
    out = tmp_path / "t.json"
    assert cli.main(["triple", "verify", "--triple", "classical:n=6,s=2", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["constants"]["s_A"] == {"value": 2.0, "provenance": certify.EXACT}
    assert all(v["passed"] for v in rep["verdicts"])


def test_report_rerender(tmp_path, capsys):
    out = tmp_path / "t.json"
    cli.main(["triple", "verify", "--triple", "classical:n=4,s=1", "--out", str(out)])
    capsys.readouterr()
    assert cli.main(["report", str(out)]) == 0
    md = capsys.readouterr().out
    assert "| s_A | 1 | exact |" in md and "| pass |" in md
    assert cli.main(["report", str(out), "--format", "json", "--out", str(tmp_path / "copy.json")]) == 0
    assert json.loads((tmp_path / "copy.json").read_text()) == json.loads(out.read_text())
    assert cli.main(["report", str(tmp_path / "missing.json")]) == 2


@pytest.mark.parametrize("cfg,needle", [
    ({}, "task: required"),
    ({"task": "solve", "map": {"kind": "e_map"}, "signal": {"x": [1.0]}}, "solver: required"),
    ({"task": "certify", "map": {"p": 2}}, "map.kind"),
    ({"task": "certify", "map": {"kind": "e_map"}, "colour": 1}, "colour: unknown field"),
    ({"task": "recover", "map": {"kind": "linear"}, "triple": "classical:n=2,s=1", "signal": {"x": [1, 0]}},
     "operator: required"),
    ({"task": "triple", "triple": "classical:n=2,s=1", "plan": {"n_pts": 0}}, "plan:"),
])
def test_validation_messages(cfg, needle):
    with pytest.raises(InvalidInputError) as info:
        validate(cfg)
    assert needle in str(info.value)


def test_invalid_config_exit_code(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("task = 'certify'\n")
    assert cli.main(["run", str(p)]) == 2
    p.write_text("task = [\n")
    assert cli.main(["run", str(p)]) == 2
    assert cli.main(["run", str(tmp_path / "nope.toml")]) == 2
    assert cli.main(["certify", "--map", "{not json"]) == 2


def test_seed_env_override(tmp_path, monkeypatch):
    cfg = {"task": "triple", "triple": "classical:n=4,s=1", "seed": 1, "outputs": {"report": None,
                                                                                    "summary": None,
                                                                                    "manifest": None}}
    m1, r1 = run_experiment(cfg, env={"NLFRAME_SEED": "5"})
    assert m1.seeds["seed"] == 5 and r1["plan"]["seed"] == 5
    monkeypatch.setenv("NLFRAME_SEED", "x")
    with pytest.raises(InvalidInputError):
        run_experiment(cfg)


def test_json_config_and_hash(tmp_path):
    cfg = {"task": "triple", "triple": "classical:n=4,s=1"}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    loaded, base = load_config(str(p))
    assert loaded == cfg and base == str(tmp_path)
    assert config_hash(cfg) == config_hash(dict(reversed(list(cfg.items()))))
    assert canonical_json({"b": 1, "a": [1.5]}) == '{"a":[1.5],"b":1}'
