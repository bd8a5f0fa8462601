"""CSV and JSON emission for run records, with exact float round-trips.

Floats are written as ``repr`` (shortest round-trip form), so reading a
file back and recomputing a metric reproduces the in-run value bit for
bit.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .drift import SERIES_NAMES, DriftProbe
from .errors import ValidationError
from .metrics import AccuracyMatrix, compute_aa, compute_bwt, compute_fwt
from .training import RunRecord, StepLog

ACCURACY_HEADER = ["t", "T", "accuracy"]
LOGS_HEADER = ["step", "task", "loss", "residual_rate", "component_count", "epsilon"]
DRIFT_HEADER = ["step", "task", "series", "mean", "std"]


def _fmt(x: float) -> str:
    return repr(float(x))


def write_accuracy_csv(path, matrix: AccuracyMatrix) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ACCURACY_HEADER)
        for (t, big_t) in sorted(matrix.values):
            writer.writerow([t, big_t, _fmt(matrix.values[(t, big_t)])])


def read_accuracy_csv(path) -> AccuracyMatrix:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ACCURACY_HEADER:
        raise ValidationError(f"{path} is not an accuracy matrix file")
    entries = [(int(t), int(big_t), float(a)) for t, big_t, a in rows[1:]]
    task_count = max((big_t for _, big_t, _ in entries), default=0)
    matrix = AccuracyMatrix(task_count=task_count)
    for t, big_t, a in entries:
        matrix.set(t, big_t, a)
    return matrix


def write_logs_csv(path, steps: list[StepLog]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOGS_HEADER)
        for s in steps:
            writer.writerow(
                [
                    s.step,
                    s.task,
                    _fmt(s.loss),
                    _fmt(s.residual_rate),
                    s.component_count,
                    _fmt(s.epsilon),
                ]
            )


def read_logs_csv(path) -> list[StepLog]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != LOGS_HEADER:
        raise ValidationError(f"{path} is not a training log file")
    return [
        StepLog(int(r[0]), int(r[1]), float(r[2]), float(r[3]), int(r[4]), float(r[5]))
        for r in rows[1:]
    ]


def write_drift_csv(path, probe: DriftProbe) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DRIFT_HEADER)
        for name in SERIES_NAMES:
            series = probe.series(name)
            for step, task, mean, std in zip(
                series.steps, series.tasks, series.mean, series.std
            ):
                writer.writerow([step, task, name, _fmt(mean), _fmt(std)])


def _metric_or_none(value):
    if value is None:
        return None
    return None if math.isnan(value) else value


def run_summary(record: RunRecord) -> dict:
    """Metrics and bookkeeping for one run, JSON-ready."""
    final = record.accuracy.task_count
    bwt = compute_bwt(record.accuracy, final)
    fwt = None
    if record.accuracy.reference is not None:
        fwt = compute_fwt(record.accuracy, final)
    return {
        "method": record.method,
        "seed": record.seed,
        "task_count": final,
        "aa": compute_aa(record.accuracy, final),
        "bwt": _metric_or_none(bwt),
        "fwt": _metric_or_none(fwt),
        "aa_by_T": [compute_aa(record.accuracy, t) for t in range(1, final + 1)],
        "reference": record.accuracy.reference,
        "audit_max_dot": record.audit_max_dot,
    }


def write_summary_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def read_summary_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_run_outputs(out_dir, record: RunRecord) -> dict:
    """Write the per-run files; returns their names for the summary."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_accuracy_csv(out_dir / "accuracy_matrix.csv", record.accuracy)
    write_logs_csv(out_dir / "logs.csv", record.steps)
    (out_dir / "checkpoint.bin").write_bytes(record.checkpoint)
    return {
        "accuracy_matrix": "accuracy_matrix.csv",
        "logs": "logs.csv",
        "checkpoint": "checkpoint.bin",
    }
