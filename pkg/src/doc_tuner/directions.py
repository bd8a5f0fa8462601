"""Functional directions: first-order output increments of a training step.

A training step moves each adapter's output by
``p_m = (lr * grad_B) @ (A @ x_m) + B @ (lr * grad_A @ x_m)`` to first
order, where ``x_m`` is the (batch-averaged) module input. Concatenating
the per-module increments gives one vector per step, the raw material for
the streaming-PCA tracker. Increments are kept unnormalized and uncentered
on purpose: their magnitudes carry the eigenvalue information the tracker
estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adapters import GradientBundle, LoraAdapter, ToyNetwork
from .errors import InvariantError, ShapeError, ValidationError


@dataclass(frozen=True)
class FunctionalDirection:
    """Concatenated per-module output increment for one training step."""

    data: np.ndarray
    slice_offsets: tuple[tuple[int, int], ...]
    step_index: int = 0

    @property
    def dim(self) -> int:
        return self.data.shape[0]


def token_average(inputs: np.ndarray) -> np.ndarray:
    """Column mean of a column-major batch of module inputs."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2:
        raise ShapeError(f"inputs must be 2-D, got ndim={inputs.ndim}")
    if inputs.shape[1] == 0:
        raise ValidationError("cannot average an empty batch")
    return inputs.mean(axis=1)


def lora_increment(
    adapter: LoraAdapter,
    grad_B: np.ndarray,
    grad_A: np.ndarray,
    x_m: np.ndarray,
    lr: float,
) -> np.ndarray:
    """First-order output increment of one adapter for one step."""
    if grad_B.shape != adapter.factor_B.shape:
        raise ShapeError(
            f"grad_B shape {grad_B.shape} != {adapter.factor_B.shape}"
        )
    if grad_A.shape != adapter.factor_A.shape:
        raise ShapeError(
            f"grad_A shape {grad_A.shape} != {adapter.factor_A.shape}"
        )
    x_m = np.asarray(x_m, dtype=np.float64)
    if x_m.shape != (adapter.n_dim,):
        raise ShapeError(f"x_m must have shape ({adapter.n_dim},)")
    return (lr * grad_B) @ (adapter.factor_A @ x_m) + adapter.factor_B @ (
        lr * (grad_A @ x_m)
    )


def concat_directions(
    increments: list[np.ndarray], step_index: int = 0
) -> FunctionalDirection:
    """Concatenate per-module increments into one FunctionalDirection."""
    if not increments:
        raise ValidationError("need at least one module increment")
    offsets, start = [], 0
    for p in increments:
        if p.ndim != 1:
            raise ShapeError("module increments must be 1-D")
        offsets.append((start, p.shape[0]))
        start += p.shape[0]
    data = np.concatenate(increments)
    if not np.all(np.isfinite(data)):
        raise ValidationError("non-finite module increment")
    return FunctionalDirection(data, tuple(offsets), step_index)


def increment_direction(
    net: ToyNetwork, grads: GradientBundle, lr: float, step_index: int = 0
) -> FunctionalDirection:
    """Whole-network functional direction for one step's uncut gradients."""
    ps = [
        lora_increment(ad, gb, ga, xm, lr)
        for ad, gb, ga, xm in zip(
            net.adapters, grads.grad_B, grads.grad_A, grads.module_inputs
        )
    ]
    return concat_directions(ps, step_index=step_index)


def coord(pool, h) -> np.ndarray:
    """Project a direction onto the pool: entry k is ``h . v_k / |v_k|``.

    The result has one entry per pool component, in pool order. Accepts a
    FunctionalDirection or a bare vector.
    """
    vec = np.asarray(getattr(h, "data", h), dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != pool.dim:
        raise ShapeError(f"direction must have shape ({pool.dim},)")
    out = np.empty(len(pool.components))
    for k, v in enumerate(pool.components):
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise InvariantError(f"pool component {k} has zero norm")
        out[k] = (vec @ v) / norm
    return out
