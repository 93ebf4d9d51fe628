"""Command-line runner: exit codes and artifact contents."""

import csv
import json
from pathlib import Path

import pytest

from derplan.cli import main
from derplan.milp import SolveConfig
from derplan.pipeline import results_json, run_scenario
from derplan.scenario import parse_scenario

from support import scenario_doc

FIXTURES = Path(__file__).parent.parent / "fixtures"


def write_doc(tmp_path, doc):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(doc))
    return str(path)


def run(tmp_path, doc, *extra):
    spath = write_doc(tmp_path, doc)
    out = tmp_path / "out"
    rc = main(["--scenario", spath, "--out", str(out), *extra])
    return rc, out


def test_grid_only_writes_results_with_zero_npv(tmp_path):
    rc, out = run(tmp_path, scenario_doc())
    assert rc == 0
    doc = json.loads((out / "results.json").read_text())
    assert doc["Financial"]["npv_us_dollars"] == 0.0


def test_results_match_pipeline_bytes(tmp_path):
    doc = scenario_doc(PV={"max_kw": 15, "cost_per_kw": 120})
    rc, out = run(tmp_path, doc)
    assert rc == 0
    expected = results_json(run_scenario(parse_scenario(doc), SolveConfig()))
    assert (out / "results.json").read_text() == expected


def test_dispatch_csv_is_balanced(tmp_path):
    doc = scenario_doc(
        PV={"max_kw": 25, "cost_per_kw": 100},
        Storage={"max_kw": 10, "max_kwh": 30,
                 "cost_per_kw": 40, "cost_per_kwh": 15},
    )
    rc, out = run(tmp_path, doc, "--emit", "results-json",
                  "--emit", "dispatch-csv")
    assert rc == 0
    with open(out / "dispatch.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 24
    header = list(rows[0])
    assert header == ["step", "load_kw", "pv_production_kw", "charge_kw",
                      "discharge_kw", "soc_kwh", "grid_purchase_kw",
                      "export_kw"]
    for h, row in enumerate(rows):
        assert int(row["step"]) == h
        supply = (float(row["pv_production_kw"])
                  + float(row["discharge_kw"])
                  + float(row["grid_purchase_kw"]))
        use = (float(row["load_kw"]) + float(row["charge_kw"])
               + float(row["export_kw"]))
        assert supply == pytest.approx(use, abs=1e-6)


def test_outage_csv_written_when_window_present(tmp_path):
    doc = scenario_doc(
        horizon=48,
        LoadProfile={"outage_start_time_step": 5, "outage_end_time_step": 8,
                     "outage_critical_load_fraction": 0.4},
        Storage={"max_kw": 10, "max_kwh": 40,
                 "cost_per_kw": 5, "cost_per_kwh": 2},
    )
    rc, out = run(tmp_path, doc, "--emit", "outage-csv")
    assert rc == 0
    lines = (out / "outage.csv").read_text().splitlines()
    assert lines[0] == "start_step,survived_steps"
    assert len(lines) == 49
    assert not (out / "results.json").exists()


def test_outage_csv_skipped_without_window(tmp_path, capsys):
    rc, out = run(tmp_path, scenario_doc(), "--emit", "outage-csv")
    assert rc == 0
    assert not (out / "outage.csv").exists()
    assert "no outage window" in capsys.readouterr().err


def test_lp_dump_written(tmp_path):
    rc, out = run(tmp_path, scenario_doc(), "--emit", "lp-dump")
    assert rc == 0
    text = (out / "model.lp").read_text()
    assert "Minimize" in text


def test_soc_ordering_violation_exits_2(tmp_path, capsys):
    doc = scenario_doc(Storage={"soc_min": 0.9, "soc_init": 0.1})
    rc, _ = run(tmp_path, doc)
    assert rc == 2
    assert "soc_init" in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path, capsys):
    rc = main(["--scenario", str(tmp_path / "nope.json"),
               "--out", str(tmp_path)])
    assert rc == 2
    assert "cannot read scenario" in capsys.readouterr().err


def test_unparseable_json_exits_2(tmp_path, capsys):
    spath = tmp_path / "broken.json"
    spath.write_text("{")
    rc = main(["--scenario", str(spath), "--out", str(tmp_path)])
    assert rc == 2
    assert "not valid JSON" in capsys.readouterr().err


def test_structural_errors_exit_2(tmp_path, capsys):
    doc = scenario_doc()
    doc["PV"] = {"definitely_not_a_field": 1}
    rc, _ = run(tmp_path, doc)
    assert rc == 2
    assert "unknown field" in capsys.readouterr().err


def test_infeasible_reserve_exits_3_and_records_status(tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["--scenario", str(FIXTURES / "infeasible_reserve.json"),
               "--out", str(out)])
    assert rc == 3
    assert "infeasible" in capsys.readouterr().err
    recorded = json.loads((out / "results.json").read_text())
    assert recorded == {"stage": "optimized", "status": "infeasible"}
