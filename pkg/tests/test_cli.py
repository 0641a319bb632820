from __future__ import annotations

import json

from pnr_dao.cli import main
from pnr_dao.gas_model import default_config_dict

from helpers import SCENARIOS


def test_validate_ok_and_invalid(tmp_path, capsys):
    assert main(["validate", str(SCENARIOS / "removal.json")]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text('{"seed": 1}')
    assert main(["validate", str(bad)]) == 1
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert main(["validate", str(broken)]) == 1
    assert "ParseError" in capsys.readouterr().err


def test_run_writes_outputs_deterministically(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(SCENARIOS / "removal.json"), "--out", str(a)]) == 0
    assert main(["run", str(SCENARIOS / "removal.json"), "--out", str(b)]) == 0
    for name in ("events.log", "metrics.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "metrics.csv").read_text().startswith("section,key,value\n")


def test_run_seed_override(tmp_path):
    main(["run", str(SCENARIOS / "sybil.json"), "--out", str(tmp_path / "x"), "--seed", "1"])
    main(["run", str(SCENARIOS / "sybil.json"), "--out", str(tmp_path / "y"), "--seed", "2"])
    assert (tmp_path / "x/events.log").read_text() != (tmp_path / "y/events.log").read_text()


def test_run_invalid_scenario_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"seed": 1, "agents": [], "script": [{"action": "onboard",
                                                                      "agent": "ghost"}]}))
    assert main(["run", str(bad), "--out", str(tmp_path)]) == 1


def test_report_formats(tmp_path, capsys):
    main(["run", str(SCENARIOS / "removal.json"), "--out", str(tmp_path)])
    capsys.readouterr()
    metrics = tmp_path / "metrics.csv"
    assert main(["report", str(metrics), "--format", "csv"]) == 0
    assert capsys.readouterr().out == metrics.read_text()
    assert main(["report", str(metrics), "--format", "table"]) == 0
    table = capsys.readouterr().out
    assert table.startswith("+") and "| conservation" in table
    assert main(["report", str(metrics), "--format", "xml"]) == 2
    assert main(["report", str(tmp_path / "missing.csv")]) == 2


def test_gas_subcommand(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(default_config_dict()))
    assert main(["gas", "--table", str(cfg), "--op", "Vote", "--n", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "op,layer,gas,usd,reduction_pct"
    assert lines[1].startswith("Vote,L1,11000,0.958375,")
    assert main(["gas", "--table", str(cfg), "--op", "Teleport"]) == 2
