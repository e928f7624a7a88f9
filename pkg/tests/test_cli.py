import csv
import json

from click.testing import CliRunner

from nudgematch.cli import main
from nudgematch.core import Core
from nudgematch.events import read_log


def test_simulate_prints_report(tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text(
        "n_students = 15        # small world\n"
        "n_teachers = 2\n"
        "horizon_ms = 3600000\n"
        "seed = 5\n")
    out = tmp_path / "sim.jsonl"
    result = CliRunner().invoke(main, ["simulate", "--config", str(cfg),
                                       "--out", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["events"] == len(read_log(out))
    assert report["final_state_hash"] == Core.replay(read_log(out)).state_hash()


def test_simulate_seed_override(tmp_path):
    runner = CliRunner()
    base = json.loads(runner.invoke(main, ["simulate"]).output)
    same = json.loads(runner.invoke(main, ["simulate", "--seed", "0"]).output)
    other = json.loads(runner.invoke(main, ["simulate", "--seed", "1"]).output)
    assert base == same
    assert other["final_state_hash"] != base["final_state_hash"]


def test_bad_config_line_is_reported(tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("this is not an assignment\n")
    result = CliRunner().invoke(main, ["simulate", "--config", str(cfg)])
    assert result.exit_code != 0
    assert "bad config line" in result.output


def test_replay_summary(tmp_path):
    out = tmp_path / "sim.jsonl"
    runner = CliRunner()
    runner.invoke(main, ["simulate", "--out", str(out), "--seed", "2"])
    result = runner.invoke(main, ["replay", "--log", str(out)])
    assert result.exit_code == 0, result.output
    summary = json.loads(result.output)
    assert summary["events"] == len(read_log(out))
    assert summary["state_hash"] == Core.replay(read_log(out)).state_hash()


def test_generate_table1_then_aggregates(tmp_path):
    out = tmp_path / "deploy.jsonl"
    runner = CliRunner()
    assert runner.invoke(main, ["generate", "table1", "--out", str(out)]).exit_code == 0
    result = runner.invoke(main, ["analyze", "aggregates", "--log", str(out)])
    assert result.exit_code == 0, result.output
    assert json.loads(result.output) == {
        "teachers_tried": 102,
        "tickets_initiated": 679,
        "tickets_accepted": 411,
        "median_tickets_per_teacher": 4,
        "unique_students_nudged": 1056,
        "unique_students_helped": 375,
    }


def test_generate_cohort_then_curves(tmp_path):
    out = tmp_path / "cohort.jsonl"
    csv_path = tmp_path / "curves.csv"
    runner = CliRunner()
    gen = runner.invoke(main, ["generate", "cohort", "--out", str(out),
                               "--seed", "3"])
    assert gen.exit_code == 0, gen.output
    result = runner.invoke(main, ["analyze", "curves", "--log", str(out),
                                  "--out", str(csv_path)])
    assert result.exit_code == 0, result.output
    with open(csv_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["day_offset"]) for r in rows] == list(range(-3, 16))
    for row in rows:
        assert 0.0 <= float(row["helped_dropout"]) <= 1.0
        assert 0.0 <= float(row["control_dropout"]) <= 1.0


def test_timeline_and_matched_vs_unmatched_csv(tmp_path):
    out = tmp_path / "cohort.jsonl"
    runner = CliRunner()
    runner.invoke(main, ["generate", "cohort", "--out", str(out), "--seed", "3"])
    records = read_log(out)
    teacher, anchor = next(
        (r.payload["teacher_id"], r.payload["created_at"])
        for r in records if r.kind == "ticket_initiated")
    result = runner.invoke(main, ["analyze", "timeline", "--log", str(out),
                                  "--teacher", teacher, "--anchor", str(anchor)])
    assert result.exit_code == 0, result.output
    rows = list(csv.DictReader(result.output.splitlines()))
    assert len(rows) == 91
    assert rows[0]["minute_offset"] == "-30"

    result = runner.invoke(main, ["analyze", "matched-vs-unmatched",
                                  "--log", str(out)])
    assert result.exit_code == 0, result.output
    rows = result.output.splitlines()
    assert rows[0].startswith("partition,label,-30,")
    assert len(rows) == 1 + 12  # header + 6 labels per partition
