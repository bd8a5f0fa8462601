"""Command-line interface: outputs, exit codes, environment handling."""

from __future__ import annotations

import json

import pytest

from doc_tuner.cli import run_cli
from doc_tuner.reporting import read_accuracy_csv, read_logs_csv, read_summary_json

BASE = {
    "lr": 0.05,
    "batch_size": 8,
    "steps_per_task": 20,
    "lora_rank": 2,
    "input_dim": 8,
    "hidden_dim": 10,
    "class_count": 3,
    "task_count": 2,
    "samples_train": 150,
    "samples_eval": 100,
    "cap_increment": 8,
}


def write_config(tmp_path, **overrides):
    payload = dict(BASE)
    payload.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload))
    return path


class TestRun:
    def test_single_run_writes_all_outputs(self, tmp_path):
        config = write_config(
            tmp_path, methods=["seq_lora"], seeds=[7], with_reference=False
        )
        out = tmp_path / "results"
        code = run_cli(
            ["run", "--config", str(config), "--out", str(out), "--quiet"]
        )
        assert code == 0
        for name in ("accuracy_matrix.csv", "logs.csv", "checkpoint.bin"):
            assert (out / name).exists()
        summary = read_summary_json(out / "summary.json")
        assert len(summary["runs"]) == 1
        entry = summary["runs"][0]
        assert entry["method"] == "seq_lora"
        assert entry["seed"] == 7
        assert entry["dir"] == "."
        matrix = read_accuracy_csv(out / "accuracy_matrix.csv")
        assert matrix.task_count == 2
        logs = read_logs_csv(out / "logs.csv")
        assert len(logs) == 2 * BASE["steps_per_task"]

    def test_matrix_run_uses_subdirectories(self, tmp_path):
        config = write_config(
            tmp_path,
            methods=["doc", "seq_lora"],
            seeds=[0, 1],
            with_reference=False,
        )
        out = tmp_path / "results"
        assert run_cli(["run", "--config", str(config), "--out", str(out),
                        "--quiet"]) == 0
        summary = read_summary_json(out / "summary.json")
        assert len(summary["runs"]) == 4
        for entry in summary["runs"]:
            run_dir = out / entry["dir"]
            assert (run_dir / "accuracy_matrix.csv").exists()
            assert entry["dir"] == f"{entry['method']}-seed{entry['seed']}"

    def test_reference_enables_fwt(self, tmp_path):
        config = write_config(
            tmp_path, methods=["seq_lora"], seeds=[0], with_reference=True
        )
        out = tmp_path / "ref"
        assert run_cli(["run", "--config", str(config), "--out", str(out),
                        "--quiet"]) == 0
        entry = read_summary_json(out / "summary.json")["runs"][0]
        assert entry["fwt"] is not None
        assert len(entry["reference"]) == BASE["task_count"]

    def test_flag_overrides(self, tmp_path):
        config = write_config(
            tmp_path,
            methods=["doc", "seq_lora"],
            seeds=[0, 1],
            with_reference=False,
        )
        out = tmp_path / "narrow"
        code = run_cli(
            [
                "run",
                "--config",
                str(config),
                "--out",
                str(out),
                "--method",
                "seq_lora",
                "--seed",
                "1",
                "--tasks",
                "1",
                "--quiet",
            ]
        )
        assert code == 0
        summary = read_summary_json(out / "summary.json")
        assert [r["method"] for r in summary["runs"]] == ["seq_lora"]
        assert summary["runs"][0]["seed"] == 1
        assert read_accuracy_csv(out / "accuracy_matrix.csv").task_count == 1

    def test_timing_flag_prints_per_step(self, tmp_path, capsys):
        config = write_config(
            tmp_path, methods=["seq_lora"], seeds=[0], with_reference=False
        )
        out = tmp_path / "timed"
        assert run_cli(["run", "--config", str(config), "--out", str(out),
                        "--time", "--quiet"]) == 0
        assert "ms/step" in capsys.readouterr().out


class TestExitCodes:
    def test_missing_config_is_validation_failure(self, tmp_path, capsys):
        missing = tmp_path / "nope.json"
        code = run_cli(["run", "--config", str(missing)])
        assert code == 1
        assert str(missing) in capsys.readouterr().err

    def test_unknown_flag_prints_usage(self, capsys):
        assert run_cli(["run", "--bogus"]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_missing_subcommand(self, capsys):
        assert run_cli([]) == 1

    def test_unknown_config_key(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"not_a_field": 1}))
        assert run_cli(["run", "--config", str(config)]) == 1
        assert "not_a_field" in capsys.readouterr().err

    def test_invalid_json_config(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text("{broken")
        assert run_cli(["run", "--config", str(config)]) == 1

    def test_bad_method(self, tmp_path, capsys):
        config = write_config(tmp_path, with_reference=False)
        assert run_cli(["run", "--config", str(config), "--method", "ewc"]) == 1

    def test_nonpositive_tasks(self, tmp_path):
        config = write_config(tmp_path, with_reference=False)
        assert run_cli(["run", "--config", str(config), "--tasks", "0"]) == 1


class TestReport:
    def test_recomputed_metrics_match_exactly(self, tmp_path, capsys):
        config = write_config(
            tmp_path, methods=["doc", "seq_lora"], seeds=[0], with_reference=True
        )
        out = tmp_path / "results"
        assert run_cli(["run", "--config", str(config), "--out", str(out),
                        "--quiet"]) == 0
        capsys.readouterr()
        assert run_cli(["report", "--out", str(out)]) == 0
        printed = capsys.readouterr().out
        assert printed.count("[ok]") == 2

    def test_tampered_csv_detected(self, tmp_path, capsys):
        config = write_config(
            tmp_path, methods=["seq_lora"], seeds=[0], with_reference=False
        )
        out = tmp_path / "results"
        assert run_cli(["run", "--config", str(config), "--out", str(out),
                        "--quiet"]) == 0
        path = out / "accuracy_matrix.csv"
        lines = path.read_text().splitlines()
        head, first = lines[0], lines[1].split(",")
        first[2] = repr(min(1.0, float(first[2]) + 0.25))
        path.write_text("\n".join([head, ",".join(first)] + lines[2:]) + "\n")
        assert run_cli(["report", "--out", str(out)]) == 2
        assert "MISMATCH" in capsys.readouterr().out

    def test_report_without_summary(self, tmp_path):
        assert run_cli(["report", "--out", str(tmp_path)]) == 1


class TestDriftProbeCommand:
    def test_writes_csv_and_summary(self, tmp_path):
        config = write_config(
            tmp_path, methods=["doc"], seeds=[0], with_reference=False
        )
        out = tmp_path / "drift"
        code = run_cli(
            ["drift-probe", "--config", str(config), "--out", str(out), "--quiet"]
        )
        assert code == 0
        assert (out / "drift_probe.csv").exists()
        payload = read_summary_json(out / "drift_summary.json")
        assert payload["anchors"] == 8
        assert payload["method"] == "doc"
        assert -1.0 - 1e-12 <= payload["final_coord_tracked"] <= 1.0 + 1e-12

    def test_needs_two_tasks(self, tmp_path):
        config = write_config(
            tmp_path, methods=["doc"], seeds=[0], with_reference=False
        )
        out = tmp_path / "drift"
        code = run_cli(
            [
                "drift-probe",
                "--config",
                str(config),
                "--out",
                str(out),
                "--tasks",
                "1",
            ]
        )
        assert code == 1


class TestSelftestCommand:
    def test_passes_and_prints_verdict(self, capsys):
        assert run_cli(["pca-selftest", "--quiet"]) == 0
        assert "PASS" in capsys.readouterr().out


class TestThreadEnvironment:
    def test_invalid_thread_count_rejected(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DOC_TUNER_THREADS", "zero")
        config = write_config(
            tmp_path, methods=["seq_lora"], seeds=[0], with_reference=False
        )
        assert run_cli(["run", "--config", str(config), "--out",
                        str(tmp_path / "o")]) == 1
        monkeypatch.setenv("DOC_TUNER_THREADS", "0")
        assert run_cli(["run", "--config", str(config), "--out",
                        str(tmp_path / "o")]) == 1

    def test_parallel_matrix_matches_serial(self, tmp_path, monkeypatch):
        config = write_config(
            tmp_path, methods=["doc", "seq_lora"], seeds=[3], with_reference=False
        )
        serial_out = tmp_path / "serial"
        monkeypatch.delenv("DOC_TUNER_THREADS", raising=False)
        assert run_cli(["run", "--config", str(config), "--out",
                        str(serial_out), "--quiet"]) == 0
        parallel_out = tmp_path / "parallel"
        monkeypatch.setenv("DOC_TUNER_THREADS", "2")
        assert run_cli(["run", "--config", str(config), "--out",
                        str(parallel_out), "--quiet"]) == 0
        for sub in ("doc-seed3", "seq_lora-seed3"):
            a = (serial_out / sub / "checkpoint.bin").read_bytes()
            b = (parallel_out / sub / "checkpoint.bin").read_bytes()
            assert a == b
