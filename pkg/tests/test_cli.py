import json
from importlib.resources import files

import jsonschema
import pytest

from bracketflow.cli import main

SCHEMA = json.loads(files("bracketflow").joinpath("schemas/summary.schema.json").read_text())


def run(tmp_path, *args, sub="out"):
    out = tmp_path / sub
    code = main([*args, "--output-dir", str(out)])
    summary = json.loads((out / "summary.json").read_text()) if (out / "summary.json").exists() else None
    if summary is not None:
        jsonschema.validate(summary, SCHEMA)
    return code, summary, out


FAST = ["--t-end", "2", "--samples", "5"]


@pytest.mark.parametrize(
    "args",
    [
        ["flow", "--input", "heis3", *FAST],
        ["flow", "--input", "sl2r", "--variant", "plain", *FAST],
        ["lyapunov", "--input", "r_heis3", *FAST],
        ["blowdown", "--input", "e11", "--scale", "10", *FAST],
        ["stratum", "--input", "heis5"],
        ["soliton-check", "--input", "heis3"],
        ["soliton-check", "--input", "abelian(2)"],
        ["catalog"],
        ["catalog", "--sweep", "--tag", "nilpotent"],
    ],
)
def test_commands_succeed_and_match_schema(tmp_path, args):
    code, summary, out = run(tmp_path, *args)
    assert code == 0 and summary["status"] == "ok"
    for f in summary.get("files", {}).values():
        assert (out / f).exists()


def test_flow_summary_contents(tmp_path):
    _, s, out = run(tmp_path, "flow", "--input", "heis3", *FAST)
    assert s["beta"]["rationalized"] == [[-1, 1], [1, 1]] and s["beta"]["multiplicities"] == [2, 1]
    assert s["classification"]["kind"] == "Soliton"
    assert s["monotonicity"]["monotone"] is True
    assert (out / "trajectory.csv").read_text().count("\n") == 6


def test_stratum_cross_check(tmp_path):
    _, s, _ = run(tmp_path, "stratum", "--input", "r_heis3")
    assert s["nilradical_check"]["max_difference"] < 1e-8


def test_extinction_exit_code(tmp_path, capsys):
    code, s, _ = run(tmp_path, "flow", "--input", "su2", "--variant", "unimodular", *FAST)
    assert code == 2
    assert s["status"] == "blowup" and s["extinction"]["time"] == pytest.approx(1.0, abs=1e-4)
    assert json.loads(capsys.readouterr().out)["status"] == "blowup"


@pytest.mark.parametrize(
    "args",
    [
        ["flow", "--input", "no_such_algebra"],
        ["flow", "--input", "heis3", "--t-end", "-1"],
        ["flow", "--input", "heis3", "--samples", "1"],
        ["stratum", "--input", "abelian(3)"],
    ],
)
def test_errors_exit_one(tmp_path, capsys, args):
    code, s, _ = run(tmp_path, *args)
    assert code == 1
    err = json.loads(capsys.readouterr().err)
    assert err["status"] == "error" and err["error"]["type"]
    if s is not None:
        assert s["status"] == "error"


def test_missing_input(tmp_path, capsys):
    code, _, _ = run(tmp_path, "stratum")
    assert code == 1
    assert json.loads(capsys.readouterr().err)["error"]["type"] == "BadConfig"


def test_reruns_are_byte_identical(tmp_path):
    args = ["lyapunov", "--input", "sl2r", *FAST]
    _, _, a = run(tmp_path, *args, sub="a")
    _, _, b = run(tmp_path, *args, sub="b")
    for name in ("trajectory.csv",):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    sa = json.loads((a / "summary.json").read_text())
    sb = json.loads((b / "summary.json").read_text())
    assert sa == sb


def test_config_file_and_flag_precedence(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"t-end": 3.0, "samples": 4, "variant": "plain"}))
    _, s, _ = run(tmp_path, "flow", "--input", "heis3", "--config", str(conf), "--samples", "6")
    assert s["config"]["t_end"] == 3.0
    assert s["config"]["samples"] == 6
    assert s["config"]["variant"] == "plain"


@pytest.mark.parametrize("content", ['{"colour": 1}', "[1, 2]", "{not json"])
def test_bad_config(tmp_path, capsys, content):
    conf = tmp_path / "c.json"
    conf.write_text(content)
    code, _, _ = run(tmp_path, "flow", "--input", "heis3", "--config", str(conf))
    assert code == 1
    assert json.loads(capsys.readouterr().err)["error"]["type"] == "BadConfig"


def test_bracket_file_input(tmp_path):
    from bracketflow import catalog

    p = tmp_path / "b.json"
    p.write_text(catalog.get("e11").bracket.to_json())
    code, s, _ = run(tmp_path, "soliton-check", "--input", str(p))
    assert code == 0 and s["classification"]["kind"] == "Soliton"


def test_parallel_sweep_matches_serial(tmp_path):
    _, a, _ = run(tmp_path, "catalog", "--sweep", "--jobs", "1", sub="a")
    _, b, _ = run(tmp_path, "catalog", "--sweep", "--jobs", "2", sub="b")
    assert a["entries"] == b["entries"]
