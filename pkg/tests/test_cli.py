import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from hems.cli import main
from hems.io import schedule_from_csv, schedule_to_csv
from hems.scenario import load_scenario, save_scenario, synth_case
from hems.formulation import solve_scenario
from hems.validation import audit

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
HOURLY = str(SCENARIOS / "reference_hourly.yaml")


@pytest.fixture()
def runner():
    return CliRunner()


def read_costs(out_dir: Path, tag: str) -> dict:
    return json.loads((out_dir / f"costs_{tag}.json").read_text())


def test_solve_case_a_dsm_both(runner, tmp_path):
    out = tmp_path / "runs"
    result = runner.invoke(
        main, ["solve", HOURLY, "--case", "A", "--dsm", "both", "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    lines = [l for l in result.output.splitlines() if l.startswith("case=A")]
    assert len(lines) == 2
    off = read_costs(out, "A_nodsm")
    on = read_costs(out, "A_dsm")
    assert on["bill_cents"] <= off["bill_cents"] + 1e-9
    assert (out / "schedule_A_dsm.csv").exists()


def test_solve_case_b_cheaper_than_a(runner, tmp_path):
    out = tmp_path / "runs"
    for case in ("A", "B"):
        result = runner.invoke(main, ["solve", HOURLY, "--case", case, "--out", str(out)])
        assert result.exit_code == 0, result.output
    a = read_costs(out, "A_dsm")
    b = read_costs(out, "B_dsm")
    assert b["bill_cents"] <= a["bill_cents"] + 1e-9


def test_solve_infeasible_ev_exits_nonzero(runner, tmp_path):
    scenario = load_scenario(HOURLY)
    doc_path = tmp_path / "impossible_ev.yaml"
    import yaml

    from hems.scenario import scenario_to_mapping

    doc = scenario_to_mapping(scenario)
    # Unreachable departure target: tiny charger, huge battery.
    doc["ev"]["charge_rate"] = 0.1
    doc["ev"]["soe_max"] = 80.0
    doc["ev"]["soe_init"] = 64.0
    doc_path.write_text(yaml.safe_dump(doc))
    result = runner.invoke(main, ["solve", str(doc_path), "--out", str(tmp_path / "r")])
    assert result.exit_code == 1
    assert "infeasible" in result.output
    assert "ev" in result.output.lower()


def test_solve_rejects_bad_scenario(runner, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("schema: hems-scenario/1\ngrid: {intervals: 2}\n")
    result = runner.invoke(main, ["solve", str(bad)])
    assert result.exit_code == 2


def test_sweep_summary_and_determinism(runner, tmp_path):
    out1 = tmp_path / "s1"
    out2 = tmp_path / "s2"
    for out in (out1, out2):
        result = runner.invoke(
            main, ["sweep", HOURLY, "--cases", "all", "--dsm", "both", "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
    summary1 = (out1 / "summary.csv").read_bytes()
    summary2 = (out2 / "summary.csv").read_bytes()
    assert summary1 == summary2

    lines = summary1.decode().splitlines()
    assert lines[0] == "# schema: hems-sweep/1"
    rows = [l.split(",") for l in lines[2:]]
    assert len(rows) == 8
    bills = {(r[0], r[1]): float(r[3]) for r in rows}
    for case in "ABCD":
        assert bills[(case, "on")] <= bills[(case, "off")] + 1e-9
    for worse, better in (("A", "B"), ("B", "C"), ("C", "D")):
        assert bills[(better, "on")] <= bills[(worse, "on")] + 1e-9
    assert (out1 / "stats.json").exists()
    # every per-case artifact pair exists
    for case in "ABCD":
        for tag in (f"{case}_dsm", f"{case}_nodsm"):
            assert (out1 / f"schedule_{tag}.csv").exists()
            assert (out1 / f"costs_{tag}.json").exists()


def test_sweep_case_subset(runner, tmp_path):
    out = tmp_path / "s"
    result = runner.invoke(
        main, ["sweep", HOURLY, "--cases", "A,B", "--dsm", "on", "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    rows = (out / "summary.csv").read_text().splitlines()[2:]
    assert len(rows) == 2


def test_sweep_rejects_non_day_horizon(runner, tmp_path):
    import yaml

    doc = {
        "schema": "hems-scenario/1",
        "grid": {"intervals": 3, "interval_hours": 1.0},
        "tariff": {"buy": [5.0, 5.0, 5.0], "sell": 3.0},
        "non_deferrable": [1.0, 1.0, 1.0],
    }
    path = tmp_path / "short.yaml"
    path.write_text(yaml.safe_dump(doc))
    result = runner.invoke(main, ["sweep", str(path)])
    assert result.exit_code == 2
    assert "24" in result.output


def test_validate_round_trip(runner, tmp_path):
    out = tmp_path / "runs"
    result = runner.invoke(main, ["solve", HOURLY, "--case", "C", "--out", str(out)])
    assert result.exit_code == 0, result.output
    scenario_path = tmp_path / "case_c.yaml"
    save_scenario(synth_case("C", True, load_scenario(HOURLY)), scenario_path)
    result = runner.invoke(
        main,
        ["validate", str(scenario_path), str(out / "schedule_C_dsm.csv"),
         "--report", str(tmp_path / "audit.json")],
    )
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "audit.json").read_text())
    assert report["passed"] is True


def test_validate_flags_tampered_soe(runner, tmp_path):
    scenario = synth_case("C", True, load_scenario(HOURLY))
    scenario_path = tmp_path / "case_c.yaml"
    save_scenario(scenario, scenario_path)
    result_obj = solve_scenario(scenario)
    csv_path = tmp_path / "schedule.csv"
    result_obj.schedule.ess.soe[5] += 0.7
    schedule_to_csv(result_obj.schedule, scenario, csv_path)
    result = runner.invoke(main, ["validate", str(scenario_path), str(csv_path)])
    assert result.exit_code == 1
    assert "ess" in result.output
    assert "FAIL" in result.output


def test_validate_mismatched_horizon_is_usage_error(runner, tmp_path):
    halfhour = SCENARIOS / "reference_halfhour.yaml"
    out = tmp_path / "runs"
    result = runner.invoke(main, ["solve", HOURLY, "--case", "A", "--out", str(out)])
    assert result.exit_code == 0
    result = runner.invoke(
        main, ["validate", str(halfhour), str(out / "schedule_A_dsm.csv")]
    )
    assert result.exit_code == 2
    assert "48" in result.output or "header" in result.output


def test_schedule_csv_round_trip(tmp_path, hourly_sweep):
    scenario, result = hourly_sweep[("D", True)]
    path = tmp_path / "d.csv"
    schedule_to_csv(result.schedule, scenario, path, origin_hour=20.0)
    header = path.read_text().splitlines()[0]
    assert header == "# schema: hems-schedule/1"
    again = schedule_from_csv(path, scenario)
    assert audit(scenario, again).passed
    import numpy as np

    assert np.allclose(again.grid_buy, result.schedule.grid_buy, atol=1e-9)
    assert np.allclose(again.ev.soe, result.schedule.ev.soe, atol=1e-9)
    assert again.shifts == result.schedule.shifts


def test_schedule_csv_parse_error_has_line_number(tmp_path, hourly_sweep):
    scenario, result = hourly_sweep[("A", True)]
    path = tmp_path / "a.csv"
    schedule_to_csv(result.schedule, scenario, path)
    lines = path.read_text().splitlines()
    fields = lines[5].split(",")
    fields[2] = "oops"  # grid_buy_kw column
    lines[5] = ",".join(fields)
    path.write_text("\n".join(lines) + "\n")
    from hems.io import ScheduleCSVError

    with pytest.raises(ScheduleCSVError, match="line 6"):
        schedule_from_csv(path, scenario)
