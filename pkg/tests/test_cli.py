from __future__ import annotations

import json

import pytest

from abnflow.cli import EXIT_CONFIG, EXIT_ENDPOINT, EXIT_OK, EXIT_VIOLATIONS, main
from abnflow.filterkit import write_reports
from abnflow.pipeline import MANIFEST_FILE, REJECTED_FILE, RETAINED_FILE
from abnflow.stub import EchoStub
from support import report


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    assert main(["generate", "--seed", "4", "--count", "30", "--out", str(out)]) == EXIT_OK
    return out


def test_generate_outputs(generated):
    names = {p.name for p in generated.iterdir()}
    assert {RETAINED_FILE, REJECTED_FILE, "stats.json", "stats.txt", MANIFEST_FILE, "figures"} <= names
    figures = sorted(p.name for p in (generated / "figures").iterdir())
    assert figures == ["act_distribution.png", "turn_lengths.png"]
    manifest = json.loads((generated / MANIFEST_FILE).read_text())
    assert manifest["complete"] and manifest["generated"] == 30
    assert set(manifest["files"]) >= {RETAINED_FILE, "figures/act_distribution.png"}


def test_generate_from_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 4, "count": 30, "figures": False}), encoding="utf-8")
    out = tmp_path / "out"
    assert main(["generate", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert not (out / "figures").exists()


def test_flags_override_config(tmp_path, generated):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 99, "count": 3}), encoding="utf-8")
    out = tmp_path / "out"
    assert main(["generate", "--config", str(cfg), "--seed", "4", "--count", "30", "--out", str(out)]) == EXIT_OK
    assert (out / RETAINED_FILE).read_bytes() == (generated / RETAINED_FILE).read_bytes()


def test_missing_catalog_exits_2_without_output(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"catalog": "nowhere.json"}), encoding="utf-8")
    out = tmp_path / "out"
    assert main(["generate", "--config", str(cfg), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()
    assert "catalog" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["generate", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_external_without_endpoint(tmp_path):
    assert main(["generate", "--mode", "external", "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_validate_clean(generated, capsys):
    assert main(["validate", str(generated / RETAINED_FILE)]) == EXIT_OK
    assert "0 problems" in capsys.readouterr().out


def test_validate_reports_broken_line(generated, tmp_path, capsys):
    rows = (generated / RETAINED_FILE).read_text().splitlines()
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(rows[:2] + [rows[2][:40]]) + "\n", encoding="utf-8")
    assert main(["validate", str(bad)]) == EXIT_VIOLATIONS
    assert "line 3" in capsys.readouterr().out


def test_validate_missing_file(tmp_path):
    assert main(["validate", str(tmp_path / "absent.jsonl")]) == EXIT_CONFIG


def test_stats_to_stdout(generated, capsys):
    assert main(["stats", str(generated / RETAINED_FILE)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "Lexical diversity" in out and "Greet-Ask" in out


def test_stats_to_directory(generated, tmp_path):
    out = tmp_path / "stats"
    assert main(["stats", str(generated / RETAINED_FILE), "--out", str(out)]) == EXIT_OK
    data = json.loads((out / "stats.json").read_text())
    assert data["generated"]["stats"]["conversations"] == len((generated / RETAINED_FILE).read_text().splitlines())
    assert (out / "figures" / "turn_lengths.png").is_file()


def test_filter_with_reports(generated, tmp_path):
    ids = [json.loads(l)["id"] for l in (generated / RETAINED_FILE).read_text().splitlines()]
    reports = tmp_path / "reports.jsonl"
    write_reports(reports, [report(i, TE=1) if n == 0 else report(i) for n, i in enumerate(ids)])
    out = tmp_path / "out"
    code = main(["filter", str(generated / RETAINED_FILE), "--reports", str(reports), "--no-figures", "--out", str(out)])
    assert code == EXIT_OK
    assert len((out / RETAINED_FILE).read_text().splitlines()) == len(ids) - 1
    assert (out / "figures").exists() is False
    stats = json.loads((out / "stats.json").read_text())
    assert stats["survival"][-1]["survivors"] == len(ids) - 1


def test_filter_with_incomplete_reports(generated, tmp_path):
    reports = tmp_path / "reports.jsonl"
    write_reports(reports, [report("conv-99999")])
    out = tmp_path / "out"
    assert main(["filter", str(generated / RETAINED_FILE), "--reports", str(reports), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()


def test_endpoint_failure_exit_code(tmp_path):
    out = tmp_path / "out"
    with EchoStub("error") as stub:
        code = main(["generate", "--mode", "external", "--endpoint", stub.generate_url, "--count", "2",
                     "--out", str(out)])
    assert code == EXIT_ENDPOINT
    assert json.loads((out / MANIFEST_FILE).read_text())["complete"] is False


def test_judge_endpoint_filter(generated, tmp_path):
    out = tmp_path / "out"
    rows = (generated / RETAINED_FILE).read_text().splitlines()[:3]
    small = tmp_path / "small.jsonl"
    small.write_text("\n".join(rows) + "\n", encoding="utf-8")
    with EchoStub() as stub:
        code = main(["filter", str(small), "--judge-endpoint", stub.judge_url, "--no-figures", "--out", str(out)])
    assert code == EXIT_OK
    assert len((out / RETAINED_FILE).read_text().splitlines()) == 3
    assert len((out / "expert_reports.jsonl").read_text().splitlines()) == 3
