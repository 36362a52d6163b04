import csv
import json
import shutil
import subprocess
import sys

import jsonschema
import pytest

from ucwfp import cli

SCEN = cli.scenarios_dir()
CONTRACTION = {"name": "c", "space": {"model": "euclidean"},
               "map": {"map": "contraction", "q": [0.3, -0.2], "c": 0.5}, "start": [-0.9, 0.3]}


def _write(path, obj, comment=None):
    text = json.dumps(obj, indent=1)
    path.write_text((f"// {comment}\n" if comment else "") + text)
    return path


def _stderr_json(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


def test_strip_comments_keeps_strings():
    text = '{"a": "x//y", /* gone */ "b": 1} // tail'
    assert json.loads(cli.strip_comments(text)) == {"a": "x//y", "b": 1}


def test_contraction_run(tmp_path):
    cfg = _write(tmp_path / "c.json", CONTRACTION, "pulled toward q")
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o"), "-q"]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["stopReason"] == "residual" and summary["hardMonitorsPassed"]
    assert summary["fixedPointDistances"][0] <= 1e-6
    rows = list(csv.reader((tmp_path / "o" / "trace.csv").open()))
    assert rows[0] == ["j", "m", "case", "d_y_prev", "residual", "d_p0", "near_ties"]
    assert len(rows) - 1 == summary["rows"]
    verdicts = json.loads((tmp_path / "o" / "verdicts.json").read_text())["verdicts"]
    assert {v["monitor"] for v in verdicts} >= {"fejer", "drop", "spread"}


def test_budget_exit(tmp_path):
    cfg = dict(CONTRACTION, stop={"maxRows": 1})
    assert cli.main(["run", json.dumps(cfg), "--out", str(tmp_path), "-q"]) == 3
    assert json.loads((tmp_path / "summary.json").read_text())["rows"] == 2


def test_inline_name_defaults(tmp_path, monkeypatch):
    monkeypatch.setenv("UCWFP_OUT", str(tmp_path))
    cfg = {k: v for k, v in CONTRACTION.items() if k != "name"}
    assert cli.main(["run", json.dumps(cfg), "-q"]) == 0
    assert (tmp_path / "inline" / "summary.json").exists()


def test_malformed_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"space": ')
    assert cli.main(["run", str(bad), "-q"]) == 1
    assert _stderr_json(capsys)["error"] == "config"


@pytest.mark.parametrize("cfg", [
    {"space": {"model": "euclidean"}},
    dict(CONTRACTION, colour="red"),
    dict(CONTRACTION, start=[3.0, 0.0]),
    dict(CONTRACTION, stop={"maxRows": "many"}),
    dict(CONTRACTION, history="some"),
    dict(CONTRACTION, monitors={"enabled": ["psychic"]}),
    dict(CONTRACTION, sMode="shortcut", map={"map": "goebelkirk"}, space={"model": "sparse_l2"}, start={"1": 0.5}),
])
def test_invalid_configs(cfg, tmp_path, capsys):
    assert cli.main(["run", json.dumps(cfg), "--out", str(tmp_path), "-q"]) == 1
    assert _stderr_json(capsys)["error"] == "config"


def test_missing_file(capsys):
    assert cli.main(["run", "/nonexistent/cfg.json", "-q"]) == 1
    assert "cannot read" in _stderr_json(capsys)["message"]


def test_usage_error_exits_one(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["launch"])
    assert info.value.code == 1
    assert _stderr_json(capsys)["error"] == "usage"


def test_injected_fault_exits_two(tmp_path):
    cfg = dict(CONTRACTION, stop={"maxRows": 120, "residualTol": 0}, inject={"row": 40})
    assert cli.main(["run", json.dumps(cfg), "--out", str(tmp_path), "-q"]) == 2
    s = json.loads((tmp_path / "summary.json").read_text())
    assert "fejer" in s["failedMonitors"] and s["injected"]["row"] == 40


def test_fixed_start(tmp_path):
    cfg = dict(CONTRACTION, start="fixed")
    assert cli.main(["run", json.dumps(cfg), "--out", str(tmp_path), "-q"]) == 0
    assert json.loads((tmp_path / "summary.json").read_text())["rows"] == 1


def test_bundled_suite(tmp_path):
    code, agg = cli.run_suite(SCEN, tmp_path, quiet=True)
    assert code == 0
    assert len(agg["scenarios"]) == 8
    assert {r["exitCode"] for r in agg["scenarios"].values()} == {0}
    for name in agg["scenarios"]:
        for kind in ("summary", "verdicts"):
            jsonschema.validate(json.loads((tmp_path / name / f"{kind}.json").read_text()), cli._schema(kind))
    jsonschema.validate(json.loads((tmp_path / "suite.json").read_text()), cli._schema("suite"))


def test_outputs_are_byte_identical(tmp_path):
    cfg = str(SCEN / "treefold.json")
    for d in ("a", "b"):
        assert cli.main(["run", cfg, "--out", str(tmp_path / d), "-q"]) == 0
    for f in ("trace.csv", "summary.json", "verdicts.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_empty_suite(tmp_path):
    (tmp_path / "in").mkdir()
    assert cli.main(["suite", str(tmp_path / "in"), "--out", str(tmp_path / "o"), "-q"]) == 0
    assert json.loads((tmp_path / "o" / "suite.json").read_text()) == {"scenarios": {}, "exitCode": 0}


def test_suite_with_corrupted_fixture(tmp_path):
    src = tmp_path / "in"
    src.mkdir()
    shutil.copy(SCEN / "contraction-euclid.json", src)
    _write(src / "broken.json", dict(CONTRACTION, name="broken", stop={"maxRows": 120, "residualTol": 0},
                                     inject={"row": 40}))
    _write(src / "garbled.json", {"name": "garbled"})
    code, agg = cli.run_suite(src, tmp_path / "o", quiet=True)
    sc = agg["scenarios"]
    assert sc["contraction-euclid"]["exitCode"] == 0
    assert sc["broken"]["exitCode"] == 2
    assert sc["garbled"]["exitCode"] == 1
    assert code == 2


def test_suite_missing_directory(tmp_path):
    assert cli.main(["suite", str(tmp_path / "nope"), "-q"]) == 1


def test_axioms_command(capsys):
    assert cli.main(["axioms", '{"model": "startree", "k": 4}', "--trials", "300"]) == 0
    body = json.loads(capsys.readouterr().out)
    assert body["passed"] and {a["axiom"] for a in body["axioms"]} >= {"W1", "W4", "triangle"}


def test_verify_map_command(capsys):
    assert cli.main(["verify-map", '{"model": "sparse_l2"}', '{"map": "goebelkirk"}', "--trials", "100"]) == 0
    body = json.loads(capsys.readouterr().out)
    assert body["passed"] and body["sOperator"]["fixedPointsExact"]


def test_verify_map_bad_pairing(capsys):
    assert cli.main(["verify-map", '{"model": "euclidean"}', '{"map": "treefold"}']) == 1


def test_console_script_entry(tmp_path):
    out = subprocess.run([sys.executable, "-m", "ucwfp.cli", "run", json.dumps(CONTRACTION), "--out",
                          str(tmp_path), "-q"], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
