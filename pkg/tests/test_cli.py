import csv
import hashlib
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from rtwifi.cli import main
from rtwifi.core import decode_register_image, register_image_from_hex, timelines_from_json
from rtwifi.netsim.library import case_study_scenario, staged_interference_scenario, throughput_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def test_schedule_case_study(tmp_path, capsys):
    scenario = str(SCENARIOS / "case_study.json")
    before = digest(scenario)
    out = tmp_path / "out"
    assert main(["schedule", "--scenario", scenario, "--solver", "hts", "--out", str(out)]) == 0
    assert digest(scenario) == before
    assert json.loads((out / "verdict.json").read_text()) == {"ok": True, "violations": []}
    rows = list(csv.DictReader(io.StringIO((out / "gantt.csv").read_text())))
    assert rows and set(rows[0]) == {"channel", "slot_start", "slot_len", "cluster", "task", "instance", "unit"}
    words = register_image_from_hex((out / "registers_ch1.hex").read_text())
    codes = decode_register_image(words, 32)
    assert codes[:2] == [0, 1]
    capsys.readouterr()

    # every artifact is accepted back by the CLI
    assert main(["verify", "--scenario", str(out / "scenario.json"), "--timeline", str(out / "timeline.json")]) == 0
    again = tmp_path / "again"
    assert main(["schedule", "--scenario", str(out / "scenario.json"), "--out", str(again)]) == 0
    assert (again / "timeline.json").read_bytes() == (out / "timeline.json").read_bytes()


def test_schedule_infeasible_names_unit(tmp_path, capsys):
    code = main(["schedule", "--scenario", str(SCENARIOS / "overloaded_unit.json"), "--out", str(tmp_path)])
    assert code == 2
    assert "('L1', 1, 1)" in capsys.readouterr().err


def test_schedule_solver_failure_names_unit(tmp_path, capsys):
    doc = {
        "superframe": {"slot_count": 13, "beacon_slots": [0]},
        "clusters": [{"id": 1}],
        "tasks": [
            {"id": 1, "cluster": 1, "unit_size": 3, "unit_count": 1, "deadline": 6, "period": 6},
            {"id": 2, "cluster": 1, "unit_size": 1, "unit_count": 1, "deadline": 1, "period": 4},
        ],
    }
    path = write_json(tmp_path / "w.json", doc)
    assert main(["schedule", "--scenario", path, "--solver", "edf", "--out", str(tmp_path / "e")]) == 2
    assert "task 2 instance 3 unit 1" in capsys.readouterr().err
    assert main(["schedule", "--scenario", path, "--solver", "hts", "--out", str(tmp_path / "h")]) == 0


def test_input_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"tasks": [\n')
    assert main(["schedule", "--scenario", str(bad), "--out", str(tmp_path)]) == 1
    assert "line 2" in capsys.readouterr().err
    assert main(["schedule", "--scenario", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    with pytest.raises(SystemExit) as info:
        main(["schedule", "--scenario", str(bad), "--nonsense"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 1


def test_verify_reports_violations(tmp_path, capsys):
    out = tmp_path / "s"
    scenario = str(SCENARIOS / "case_study.json")
    main(["schedule", "--scenario", scenario, "--out", str(out)])
    doc = json.loads((out / "timeline.json").read_text())
    doc["timelines"][0]["placements"].pop()
    broken = write_json(tmp_path / "broken.json", doc)
    capsys.readouterr()
    assert main(["verify", "--scenario", scenario, "--timeline", broken, "--format", "json"]) == 2
    report = json.loads(capsys.readouterr().out)
    assert not report["ok"] and report["violations"][0]["kind"] == "completeness"


def test_simulate_single_link(tmp_path, capsys):
    out = tmp_path / "sim"
    assert main(["simulate", "--scenario", str(SCENARIOS / "single_link.json"), "--out", str(out), "--format", "json"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["links"]["STA1"]["throughput_mbps"] == pytest.approx(25.52, rel=0.01)
    for name in ("links.csv", "stages.csv", "rates.csv", "schedule.csv", "delays.csv", "sync.csv", "scenario.json"):
        assert (out / name).exists()
    assert json.loads(capsys.readouterr().out)["seed"] == summary["seed"]


def test_simulate_seedless_echoes_seed(tmp_path, capsys):
    doc = throughput_scenario(1, superframes=10)
    doc.pop("seed")
    path = write_json(tmp_path / "noseed.json", doc)
    assert main(["simulate", "--scenario", path, "--out", str(tmp_path / "a")]) == 0
    err = capsys.readouterr().err
    seed = int(err.split("seed")[1].split()[0])
    replay = json.loads((tmp_path / "a" / "scenario.json").read_text())
    assert replay["seed"] == seed
    main(["simulate", "--scenario", str(tmp_path / "a" / "scenario.json"), "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()


def test_simulate_staged_rate_trace(tmp_path):
    out = tmp_path / "st"
    assert main(["simulate", "--scenario", str(SCENARIOS / "staged_interference.json"), "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO((out / "rates.csv").read_text())))
    rates = [int(rows[0]["old_mbps"])] + [int(r["new_mbps"]) for r in rows]
    low = rates.index(min(rates))
    assert rates[: low + 1] == sorted(rates[: low + 1], reverse=True)
    assert rates[low:] == sorted(rates[low:])


def test_simulate_fail_on_infeasible(tmp_path, capsys):
    doc = case_study_scenario(stage_us=2e5)
    doc["trace"]["links"] = {k: [[0, 30], [2e5, 8]] for k in ("STA1", "STA2", "AP1", "AP2", "STA3", "STA4")}
    doc["duration_us"] = 4e5
    path = write_json(tmp_path / "crash.json", doc)
    assert main(["simulate", "--scenario", path, "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--scenario", path, "--out", str(tmp_path / "b"), "--fail-on-infeasible"]) == 3
    assert "rescheduling infeasible" in capsys.readouterr().err
    doc["fail_on_infeasible"] = True
    assert main(["simulate", "--scenario", write_json(tmp_path / "c.json", doc), "--out", str(tmp_path / "c")]) == 3


def test_sweep_deterministic(tmp_path, capsys):
    cfg = write_json(tmp_path / "cfg.json", {"sets_per_bucket": 15, "seed": 2})
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    a = (tmp_path / "a" / "schedulability.csv").read_bytes()
    assert a == (tmp_path / "b" / "schedulability.csv").read_bytes()
    rows = list(csv.DictReader(io.StringIO(a.decode())))
    assert [r["bucket"] for r in rows] == ["0.30", "0.40", "0.50", "0.60", "0.70", "0.80", "0.90"]
    assert all(int(r["exact"]) + int(r["exact_budget_exhausted"]) >= int(r["hts"]) for r in rows)
    # the written config is a valid config
    assert main(["sweep", "--config", str(tmp_path / "a" / "sweep_config.json"), "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "schedulability.csv").read_bytes() == a
    bad = write_json(tmp_path / "bad.json", {"sets": 3})
    assert main(["sweep", "--config", bad, "--out", str(tmp_path / "d")]) == 1


def test_snr_bench_and_rate_table(tmp_path, capsys):
    assert main(["snr-bench", "--runs", "20", "--snr", "10", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "snr_bench.csv").read_text().startswith("true_snr,method,mean,std,n")
    capsys.readouterr()
    assert main(["rate-table"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1] == "54,25,174,1" and lines[-1] == "6,7,846,5"
    assert main(["rate-table", "--format", "json", "--out", str(tmp_path)]) == 0
    table = json.loads((tmp_path / "rate_table.json").read_text())
    assert [e["atomic_slot_usage"] for e in table["entries"]] == [1, 2, 2, 2, 2, 3, 4, 5]


def test_export_regs_matches_schedule(tmp_path):
    scenario = str(SCENARIOS / "case_study.json")
    main(["schedule", "--scenario", scenario, "--out", str(tmp_path / "s")])
    timeline = str(tmp_path / "s" / "timeline.json")
    assert main(["export-regs", "--scenario", scenario, "--timeline", timeline, "--out", str(tmp_path / "r")]) == 0
    assert (tmp_path / "r" / "registers_ch1.hex").read_text() == (tmp_path / "s" / "registers_ch1.hex").read_text()
    assert len((tmp_path / "r" / "registers_ch1.bin").read_bytes()) == 64
    assert timelines_from_json(Path(timeline).read_text())


def test_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("RTWIFI_OUT", str(tmp_path / "envout"))
    assert main(["snr-bench", "--runs", "5", "--snr", "20"]) == 0
    assert (tmp_path / "envout" / "snr_bench.csv").exists()


def test_help_documents_environment():
    proc = subprocess.run([sys.executable, "-m", "rtwifi.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "RTWIFI_OUT" in proc.stdout and "RTWIFI_LOG" in proc.stdout
