#!/usr/bin/env python3
"""Side-by-side forgetting benchmark over the stream methods.

Runs every requested method x seed pair on the same task-stream
geometry, writes the usual per-run files plus a summary.json, and
prints per-method medians of final average accuracy and backward
transfer. The --long preset stretches the stream to 15 tasks to
exercise cap raising and direction tracking over a longer horizon
(takes a few minutes instead of seconds).
"""

from __future__ import annotations

import argparse
import statistics
import time
from pathlib import Path

from doc_tuner.config import ExperimentConfig, config_to_dict
from doc_tuner.reporting import run_summary, write_run_outputs, write_summary_json
from doc_tuner.tasks import make_task_stream
from doc_tuner.training import (
    STREAM_METHODS,
    RunConfig,
    reference_accuracies,
    run_stream,
)


def tasks_for(cfg: RunConfig):
    return make_task_stream(
        cfg.seed,
        cfg.task_count,
        class_count=cfg.class_count,
        samples_train=cfg.samples_train,
        samples_eval=cfg.samples_eval,
        input_dim=cfg.input_dim,
    )


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--methods",
        default=",".join(STREAM_METHODS),
        help="comma-separated stream methods to run",
    )
    parser.add_argument("--seeds", default="0,1,2", help="comma-separated seeds")
    parser.add_argument("--tasks", type=int, default=None, help="stream length")
    parser.add_argument("--steps", type=int, default=None, help="steps per task")
    parser.add_argument(
        "--long", action="store_true", help="15-task preset (overrides --tasks)"
    )
    parser.add_argument(
        "--with-reference",
        action="store_true",
        help="also train per-task reference models so FWT is reported",
    )
    parser.add_argument("--out", default="results/benchmark", help="output root")
    return parser.parse_args()


def main() -> None:
    args = parse_args()
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    seeds = [int(s) for s in args.seeds.split(",")]
    overrides: dict = {}
    if args.long:
        overrides["task_count"] = 15
    elif args.tasks is not None:
        overrides["task_count"] = args.tasks
    if args.steps is not None:
        overrides["steps_per_task"] = args.steps

    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    references: dict[int, list[float]] = {}
    entries = []
    started = time.perf_counter()
    for method in methods:
        for seed in seeds:
            cfg = RunConfig(method=method, seed=seed, **overrides)
            if args.with_reference and seed not in references:
                references[seed] = reference_accuracies(cfg, tasks_for(cfg))
            record = run_stream(cfg, tasks_for(cfg))
            if seed in references:
                record.accuracy.reference = references[seed]
            run_dir = out_root / f"{method}-seed{seed}"
            entry = run_summary(record)
            entry["files"] = write_run_outputs(run_dir, record)
            entry["dir"] = run_dir.name
            entries.append(entry)
            bwt = entry["bwt"]
            bwt_str = "    n/a" if bwt is None else f"{bwt:+.3f}"
            print(
                f"{method:>13} seed {seed}: AA {entry['aa']:.3f}"
                f"  BWT {bwt_str}  -> {run_dir.name}/"
            )
    elapsed = time.perf_counter() - started

    experiment = ExperimentConfig(
        base=RunConfig(**overrides),
        methods=methods,
        seeds=seeds,
        with_reference=args.with_reference,
    )
    payload = {"config": config_to_dict(experiment), "runs": entries}
    write_summary_json(out_root / "summary.json", payload)

    print(f"\n{len(entries)} runs in {elapsed:.1f}s; medians by method:")
    print(f"{'method':>13}  {'AA':>7}  {'BWT':>7}")
    for method in methods:
        rows = [e for e in entries if e["method"] == method]
        aa = statistics.median(e["aa"] for e in rows)
        bwts = [e["bwt"] for e in rows if e["bwt"] is not None]
        bwt_str = f"{statistics.median(bwts):+7.3f}" if bwts else "    n/a"
        print(f"{method:>13}  {aa:7.3f}  {bwt_str}")
    print(f"outputs under {out_root}/")


if __name__ == "__main__":
    main()
