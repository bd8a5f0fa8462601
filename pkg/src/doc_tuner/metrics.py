"""Continual-learning metrics over a lower-triangular accuracy matrix.

``a[t, T]`` is accuracy on task t's held-out split measured right after
finishing training on task T (1-based, t <= T). Average accuracy looks at
one row; backward transfer compares a task's final accuracy against its
just-trained accuracy; forward transfer compares the just-trained accuracy
against a reference network trained on that task alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass
class AccuracyMatrix:
    task_count: int
    values: dict[tuple[int, int], float] = field(default_factory=dict)
    reference: list[float] | None = None

    def set(self, t: int, big_t: int, accuracy: float) -> None:
        if not (1 <= t <= big_t <= self.task_count):
            raise ValidationError(f"bad matrix index ({t}, {big_t})")
        if not 0.0 <= accuracy <= 1.0:
            raise ValidationError(f"accuracy {accuracy} outside [0, 1]")
        self.values[(t, big_t)] = float(accuracy)

    def get(self, t: int, big_t: int) -> float:
        try:
            return self.values[(t, big_t)]
        except KeyError:
            raise ValidationError(f"matrix entry ({t}, {big_t}) missing") from None

    def row(self, big_t: int) -> list[float]:
        return [self.get(t, big_t) for t in range(1, big_t + 1)]


def compute_aa(matrix: AccuracyMatrix, big_t: int) -> float:
    """Mean accuracy over all tasks seen so far, after task ``big_t``."""
    if not 1 <= big_t <= matrix.task_count:
        raise ValidationError(f"T={big_t} outside [1, {matrix.task_count}]")
    return float(np.mean(matrix.row(big_t)))


def compute_bwt(matrix: AccuracyMatrix, big_t: int) -> float | None:
    """Mean accuracy change of earlier tasks; None when T = 1."""
    if not 1 <= big_t <= matrix.task_count:
        raise ValidationError(f"T={big_t} outside [1, {matrix.task_count}]")
    if big_t == 1:
        return None
    diffs = [
        matrix.get(t, big_t) - matrix.get(t, t) for t in range(1, big_t)
    ]
    return float(np.mean(diffs))


def compute_fwt(matrix: AccuracyMatrix, big_t: int) -> float | None:
    """Mean just-trained gain over isolated references; None when T = 1."""
    if not 1 <= big_t <= matrix.task_count:
        raise ValidationError(f"T={big_t} outside [1, {matrix.task_count}]")
    if matrix.reference is None:
        raise ValidationError("matrix has no reference accuracies")
    if len(matrix.reference) < big_t:
        raise ValidationError("reference accuracies shorter than T")
    if big_t == 1:
        return None
    diffs = [
        matrix.get(t, t) - matrix.reference[t - 1] for t in range(2, big_t + 1)
    ]
    return float(np.mean(diffs))
