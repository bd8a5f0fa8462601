"""Experiment configuration: a run matrix over methods and seeds.

The JSON file is flat: every RunConfig field may appear by name, plus
``methods``, ``seeds`` and ``with_reference``. Unknown keys are rejected
so typos fail loudly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace

from .errors import ValidationError
from .training import METHODS, STREAM_METHODS, RunConfig

_RUN_FIELDS = {f.name: f.type for f in fields(RunConfig)}
_MATRIX_FIELDS = ("methods", "seeds", "with_reference")


@dataclass
class ExperimentConfig:
    """Base hyperparameters plus the (method, seed) matrix to run."""

    base: RunConfig = field(default_factory=RunConfig)
    methods: list[str] = field(
        default_factory=lambda: ["doc", "seq_lora", "doc_ablation"]
    )
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    with_reference: bool = True

    def __post_init__(self):
        if not self.methods:
            raise ValidationError("methods list is empty")
        for m in self.methods:
            if m not in STREAM_METHODS:
                raise ValidationError(
                    f"method {m!r} not runnable in a stream; choose from "
                    f"{STREAM_METHODS}"
                )
        if not self.seeds:
            raise ValidationError("seeds list is empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValidationError("seeds must be distinct")

    def run_config(self, method: str, seed: int) -> RunConfig:
        return replace(self.base, method=method, seed=seed)

    def jobs(self) -> list[tuple[str, int]]:
        return [(m, s) for m in self.methods for s in self.seeds]


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ValidationError("config JSON must be an object")
    unknown = set(raw) - set(_RUN_FIELDS) - set(_MATRIX_FIELDS)
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    run_kwargs = {k: raw[k] for k in raw if k in _RUN_FIELDS}
    base = RunConfig(**run_kwargs)
    matrix_kwargs = {k: raw[k] for k in raw if k in _MATRIX_FIELDS}
    return ExperimentConfig(base=base, **matrix_kwargs)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {f.name: getattr(cfg.base, f.name) for f in fields(RunConfig)}
    out["methods"] = list(cfg.methods)
    out["seeds"] = list(cfg.seeds)
    out["with_reference"] = cfg.with_reference
    return out


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {path} is not valid JSON: {exc}") from None
    return config_from_dict(raw)
