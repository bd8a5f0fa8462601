"""Command-line interface.

Subcommands:

* ``run``          train the configured (method, seed) matrix
* ``drift-probe``  train one stream under drift probes
* ``pca-selftest`` check the streaming tracker against a batch eigensolve
* ``report``       recompute metrics from stored CSV files and verify them

Exit codes: 0 success, 1 validation problem (flags, config), 2 runtime
failure. ``DOC_TUNER_THREADS`` caps how many runs execute in parallel.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .config import ExperimentConfig, config_to_dict, load_config
from .drift import run_drift_probe
from .errors import DocTunerError, ValidationError
from .metrics import compute_aa, compute_bwt, compute_fwt
from .reporting import (
    read_accuracy_csv,
    read_summary_json,
    run_summary,
    write_drift_csv,
    write_run_outputs,
    write_summary_json,
)
from .selftest import pca_selftest
from .tasks import make_task_stream
from .training import RunConfig, reference_accuracies, run_stream


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{message}\n{self.format_usage()}")


def _add_common(sub):
    sub.add_argument("--config", help="JSON config file")
    sub.add_argument("--seed", type=int, help="override the seed list")
    sub.add_argument("--out", default="results", help="output directory")
    sub.add_argument("--method", help="restrict to one method")
    sub.add_argument("--tasks", type=int, help="override task count")
    sub.add_argument("--quiet", action="store_true", help="suppress progress")
    sub.add_argument(
        "--time", action="store_true", help="print mean per-step duration"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="doc-tuner", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "drift-probe", "pca-selftest", "report"):
        _add_common(subs.add_parser(name))
    return parser


def _load_experiment(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.method:
        cfg = replace(cfg, methods=[args.method])
    if args.seed is not None:
        cfg = replace(cfg, seeds=[args.seed])
    if args.tasks is not None:
        if args.tasks < 1:
            raise ValidationError("--tasks must be positive")
        cfg = replace(cfg, base=replace(cfg.base, task_count=args.tasks))
    return cfg


def _thread_count() -> int:
    raw = os.environ.get("DOC_TUNER_THREADS")
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(f"DOC_TUNER_THREADS must be an integer, got {raw!r}")
    if value < 1:
        raise ValidationError("DOC_TUNER_THREADS must be >= 1")
    return value


def _tasks_for(run_cfg: RunConfig):
    return make_task_stream(
        run_cfg.seed,
        run_cfg.task_count,
        class_count=run_cfg.class_count,
        samples_train=run_cfg.samples_train,
        samples_eval=run_cfg.samples_eval,
        input_dim=run_cfg.input_dim,
    )


def _cmd_run(args) -> int:
    cfg = _load_experiment(args)
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    jobs = cfg.jobs()
    single = len(jobs) == 1

    references: dict[int, list[float]] = {}
    if cfg.with_reference:
        for seed in cfg.seeds:
            run_cfg = cfg.run_config(cfg.methods[0], seed)
            references[seed] = reference_accuracies(run_cfg, _tasks_for(run_cfg))

    def execute(job):
        method, seed = job
        run_cfg = cfg.run_config(method, seed)
        started = time.perf_counter()
        record = run_stream(run_cfg, _tasks_for(run_cfg))
        elapsed = time.perf_counter() - started
        if seed in references:
            record.accuracy.reference = references[seed]
        return record, elapsed

    results = {}
    threads = _thread_count()
    if threads == 1 or single:
        for job in jobs:
            results[job] = execute(job)
            if not args.quiet:
                print(f"finished {job[0]} seed={job[1]}")
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for job, result in zip(jobs, pool.map(execute, jobs)):
                results[job] = result
                if not args.quiet:
                    print(f"finished {job[0]} seed={job[1]}")

    summary = {"config": config_to_dict(cfg), "runs": []}
    for job in jobs:
        record, elapsed = results[job]
        run_dir = out_root if single else out_root / f"{job[0]}-seed{job[1]}"
        files = write_run_outputs(run_dir, record)
        entry = run_summary(record)
        entry["files"] = files
        entry["dir"] = str(run_dir.relative_to(out_root)) if not single else "."
        summary["runs"].append(entry)
        if args.time:
            per_step = elapsed / (record.accuracy.task_count * cfg.base.steps_per_task)
            print(f"{job[0]} seed={job[1]}: {per_step * 1e3:.3f} ms/step mean")
        if not args.quiet:
            print(
                f"{job[0]} seed={job[1]}: aa={entry['aa']:.4f} "
                f"bwt={entry['bwt'] if entry['bwt'] is not None else 'n/a'}"
            )
    write_summary_json(out_root / "summary.json", summary)
    return 0


def _cmd_drift_probe(args) -> int:
    cfg = _load_experiment(args)
    method = args.method or "doc"
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    run_cfg = cfg.run_config(method, seed)
    if run_cfg.task_count < 2:
        raise ValidationError("drift probe needs at least two tasks")
    probe = run_drift_probe(run_cfg, _tasks_for(run_cfg))
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    write_drift_csv(out_root / "drift_probe.csv", probe)
    last_tracked = probe.coord_tracked.mean[-1] if probe.coord_tracked.mean else None
    last_frozen = probe.coord_frozen.mean[-1] if probe.coord_frozen.mean else None
    payload = {
        "method": method,
        "seed": seed,
        "anchors": int(probe.anchor_y.shape[0]),
        "flagged": probe.flagged,
        "final_coord_tracked": last_tracked,
        "final_coord_frozen": last_frozen,
    }
    write_summary_json(out_root / "drift_summary.json", payload)
    if not args.quiet and last_tracked is not None:
        print(
            f"final coordinate cosine: tracked={last_tracked:.4f} "
            f"frozen={last_frozen:.4f}"
        )
    return 0


def _cmd_selftest(args) -> int:
    seed = args.seed if args.seed is not None else 0
    result = pca_selftest(seed=seed)
    if not args.quiet:
        for k, c in enumerate(result.cosines, start=1):
            print(f"component {k}: |cos| = {c:.6f} (threshold {result.threshold})")
        print(
            f"{result.component_count} components after stream, "
            f"{result.elapsed_seconds:.2f}s"
        )
    print("PASS" if result.passed else "FAIL")
    return 0 if result.passed else 2


def _cmd_report(args) -> int:
    out_root = Path(args.out)
    summary_path = out_root / "summary.json"
    if not summary_path.exists():
        raise ValidationError(f"no summary.json under {out_root}")
    summary = read_summary_json(summary_path)
    all_ok = True
    for entry in summary.get("runs", []):
        run_dir = out_root / entry.get("dir", ".")
        matrix = read_accuracy_csv(run_dir / entry["files"]["accuracy_matrix"])
        matrix.reference = entry.get("reference")
        final = matrix.task_count
        aa = compute_aa(matrix, final)
        bwt = compute_bwt(matrix, final)
        fwt = compute_fwt(matrix, final) if matrix.reference else None
        ok = aa == entry["aa"] and bwt == entry["bwt"] and fwt == entry["fwt"]
        all_ok = all_ok and ok
        bwt_s = "n/a" if bwt is None else f"{bwt:+.4f}"
        fwt_s = "n/a" if fwt is None else f"{fwt:+.4f}"
        print(
            f"{entry['method']} seed={entry['seed']}: aa={aa:.4f} bwt={bwt_s} "
            f"fwt={fwt_s} [{'ok' if ok else 'MISMATCH'}]"
        )
    if not all_ok:
        raise DocTunerError("stored metrics do not match recomputation")
    return 0


def run_cli(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "run": _cmd_run,
            "drift-probe": _cmd_drift_probe,
            "pca-selftest": _cmd_selftest,
            "report": _cmd_report,
        }[args.command]
        return handler(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DocTunerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
