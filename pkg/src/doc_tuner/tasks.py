"""Synthetic classification tasks: rotated Gaussian mixtures.

Each task draws class centers on the unit sphere, adds isotropic noise,
and rotates the whole cloud by a task-specific random orthogonal matrix.
Everything is a pure function of the spec's seeds, so a dataset can be
regenerated at any time instead of stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class TaskSpec:
    """Deterministic recipe for one task's data."""

    task_id: int
    seed: int
    class_count: int = 4
    samples_train: int = 2000
    samples_eval: int = 1000
    rotation_seed: int = 0
    input_dim: int = 32


@dataclass
class TaskData:
    """Materialized splits for one task, column-major."""

    task_id: int
    train_x: np.ndarray
    train_y: np.ndarray
    eval_x: np.ndarray
    eval_y: np.ndarray
    train_reads: int = field(default=0, repr=False)

    def train_batch(self, rng: np.random.Generator, size: int):
        """Sample a training batch with replacement; counts the access."""
        self.train_reads += 1
        idx = rng.integers(0, self.train_y.shape[0], size=size)
        return self.train_x[:, idx], self.train_y[idx]


def _random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def _draw_split(
    spec: TaskSpec,
    centers: np.ndarray,
    rotation: np.ndarray,
    rng: np.random.Generator,
    count: int,
    noise_scale: float,
):
    labels = rng.integers(0, spec.class_count, size=count)
    points = centers[labels] + noise_scale * rng.standard_normal(
        (count, spec.input_dim)
    )
    return rotation @ points.T, labels


def generate_task(spec: TaskSpec, noise_scale: float = 0.3) -> TaskData:
    """Materialize a task; identical specs yield bit-identical data."""
    if spec.class_count < 2:
        raise ValidationError("need at least two classes")
    if spec.samples_train < 1 or spec.samples_eval < 1:
        raise ValidationError("sample counts must be positive")
    if spec.input_dim < 1:
        raise ValidationError("input_dim must be positive")
    center_rng = np.random.default_rng([spec.seed, 0x63])
    centers = center_rng.standard_normal((spec.class_count, spec.input_dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    rotation = _random_orthogonal(
        spec.input_dim, np.random.default_rng([spec.rotation_seed, 0x72])
    )
    sample_rng = np.random.default_rng([spec.seed, 0x73])
    train_x, train_y = _draw_split(
        spec, centers, rotation, sample_rng, spec.samples_train, noise_scale
    )
    eval_x, eval_y = _draw_split(
        spec, centers, rotation, sample_rng, spec.samples_eval, noise_scale
    )
    return TaskData(spec.task_id, train_x, train_y, eval_x, eval_y)


def make_task_stream(
    seed: int,
    task_count: int,
    *,
    class_count: int = 4,
    samples_train: int = 2000,
    samples_eval: int = 1000,
    input_dim: int = 32,
) -> list[TaskSpec]:
    """Derive a stream of task specs from one master seed."""
    if task_count < 1:
        raise ValidationError("task_count must be positive")
    return [
        TaskSpec(
            task_id=t,
            seed=seed * 100003 + t,
            class_count=class_count,
            samples_train=samples_train,
            samples_eval=samples_eval,
            rotation_seed=seed * 200003 + t,
            input_dim=input_dim,
        )
        for t in range(1, task_count + 1)
    ]
