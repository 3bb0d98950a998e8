import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from gldual.cli import main
from gldual.config import parse_config
from gldual.harness import run_scenario, thread_count
from gldual.report import Report, Table, emit, to_csv, to_json, verdict

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

R1 = "nodes=3\ngamma=1\nalpha=1\nbeta=1\nK=10\neps=0.1\nf=const:0\ntask=verify-thm1\n"


def test_verdict_relations():
    assert verdict("a", 1.0, "<=", 2.0).margin == 1.0
    assert not verdict("a", 3.0, "<=", 2.0).passed
    assert verdict("a", 3.0, ">", 2.0).passed and verdict("a", 3.0, ">", 2.0).margin == 1.0
    assert not verdict("a", 2.0, "<", 2.0).passed
    with pytest.raises(ValueError):
        verdict("a", 1.0, "~", 2.0)


def test_json_round_trip_bit_exact():
    r = Report("t")
    vals = [0.1, 1 / 3, 2.0 ** -1074, 1e308, -0.0, 123456789.123456789]
    for i, v in enumerate(vals):
        r.scalars[f"x{i}"] = v
    r.scalars["nan"] = math.nan
    back = json.loads(to_json(r))["scalars"]
    for i, v in enumerate(vals):
        assert back[f"x{i}"] == v
    assert back["nan"] is None


def test_csv_header_only_and_quoting():
    r = Report("t")
    r.tables["rows"] = Table(["a", "b"])
    assert to_csv(r) == "a,b\r\n"
    r.tables["rows"].add(a='he said "hi", twice', b=0.1)
    rows = list(csv.reader(io.StringIO(to_csv(r))))
    assert rows[1] == ['he said "hi", twice', "0.10000000000000001"]


def test_csv_falls_back_to_verdicts():
    r = Report("t")
    r.check("gap", 1e-12, "<=", 1e-9)
    assert to_csv(r).splitlines()[0] == "name,passed,value,relation,threshold,margin"


def test_emit(tmp_path):
    r = Report("t")
    r.scalars["a"] = 1.5
    emit(r, "json", tmp_path / "r.json")
    assert json.loads((tmp_path / "r.json").read_text())["scalars"]["a"] == 1.5
    with pytest.raises(ValueError):
        emit(r, "xml", tmp_path / "r.xml")


def test_run_r1_verify_thm1():
    r = run_scenario(parse_config(R1))
    assert r.passed and r.scalars["gap"] <= 1e-12
    assert r.scenario["task"] == "verify-thm1"


def test_sweep_rows():
    s = parse_config(R1).with_sweep("K", [1, 2, 5, 10, 20])
    r = run_scenario(s)
    rows = r.tables["sweep"].rows
    assert [row[0] for row in rows] == [1, 2, 5, 10, 20]
    cols = r.tables["sweep"].columns
    assert "in_Bstar" in cols and "gap" in cols
    assert len(to_csv(r).strip().splitlines()) == 6


def test_sweep_threads_deterministic(monkeypatch):
    s = parse_config(R1).with_sweep("K", [1, 3, 10])
    monkeypatch.setenv("GLDUAL_THREADS", "1")
    one = to_json(run_scenario(s))
    monkeypatch.setenv("GLDUAL_THREADS", "3")
    assert thread_count() == 3
    assert to_json(run_scenario(s)) == one
    monkeypatch.setenv("GLDUAL_THREADS", "lots")
    assert thread_count() == 1


def test_naive_dual_diag():
    r = run_scenario(parse_config((CONFIGS / "naive-dual.cfg").read_text()))
    assert r.scalars["critical_naive_status"] == "indefinite"
    assert r.scalars["classification"] == "LocalMin"
    assert r.passed


def test_errors_become_failed_verdicts():
    # Newton from far away with one iteration cannot converge
    s = parse_config(R1.replace("f=const:0", "f=const:0.5\ninit=const:50\nmaxit=1"))
    r = run_scenario(s)
    assert not r.passed and r.errors[0].startswith("NoConvergence")
    assert r.verdicts[0].name == "completed" and not r.verdicts[0].passed


@pytest.mark.parametrize("cfg", sorted(p.name for p in CONFIGS.glob("*.cfg")))
def test_shipped_configs_pass(cfg):
    r = run_scenario(parse_config((CONFIGS / cfg).read_text(), base=CONFIGS))
    assert r.passed, [v.name for v in r.verdicts if not v.passed]


def test_cli_run_and_csv(tmp_path, capsys):
    cfg = tmp_path / "r1.cfg"
    cfg.write_text(R1)
    code = main(["run", str(cfg), "--out", str(tmp_path / "o.json"), "--csv", str(tmp_path / "o.csv"),
                 "--seed", "3"])
    assert code == 0
    data = json.loads((tmp_path / "o.json").read_text())
    assert data["passed"] and data["scenario"]["seed"] == 3
    assert (tmp_path / "o.csv").read_text().startswith("direction,")


def test_cli_stdout_and_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("gamma=1\n")
    assert main(["run", str(cfg)]) == 2
    cfg.write_text(R1.replace("K=10", "K=1").replace("beta=1", "beta=10"))
    assert main(["run", str(cfg)]) == 1
    out = capsys.readouterr()
    assert json.loads(out.out)["passed"] is False and "FAIL triple_in_Bstar" in out.err


def test_cli_sweep(tmp_path):
    cfg = tmp_path / "r1.cfg"
    cfg.write_text(R1)
    out = tmp_path / "s.csv"
    assert main(["sweep", str(cfg), "--param", "K", "--values", "1,2,5,10", "--csv", str(out),
                 "--out", str(tmp_path / "s.json")]) == 0
    assert len(out.read_text().strip().splitlines()) == 5


def test_cli_module_byte_identical(tmp_path):
    cfg = tmp_path / "r1.cfg"
    cfg.write_text(R1)
    blobs = []
    for k in range(2):
        out = tmp_path / f"{k}.json"
        subprocess.run([sys.executable, "-m", "gldual", "run", str(cfg), "--out", str(out), "--seed", "5"],
                       check=True)
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1]


def test_cli_check_subset(capsys):
    assert main(["check", "--only", "9"]) == 0
    assert "[PASS] criterion  9" in capsys.readouterr().out
