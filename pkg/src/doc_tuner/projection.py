"""Per-module slice bases and orthogonal gradient cuts.

Each pool component concatenates per-module output increments, so slicing
it at a module's offset yields the direction that module contributed. To
keep a new task's updates from disturbing the function learned on earlier
tasks, each column of the B-factor gradient is stripped of its projection
onto those historical slices:

    g_i <- g_i - sum_k (g_i . v_k / |v_k|^2) * v_k

With an orthonormalized slice basis (the default) the sweep is an exact
projection onto the orthogonal complement, so the composed update
``(cut grad_B) @ A @ x`` cannot move any historical direction no matter
what input ``x`` arrives. The literal mode applies the same one-shot sum
over the raw, generally non-orthogonal slices instead; it is cheaper but
only approximately orthogonal.

A-factor gradients are never modified anywhere in this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError
from .online_pca import ComponentPool

DROP_TOL = 1e-10
ZERO_TOL = 1e-12


@dataclass
class SliceBasis:
    """Historical directions of one module, optionally orthonormalized."""

    module_index: int
    vectors: list[np.ndarray]
    orthonormalized: bool
    source_component_ids: list[int]


def _orthonormalize(
    rows: np.ndarray, ids: list[int]
) -> tuple[list[np.ndarray], list[int]]:
    """Gram-Schmidt with reorthogonalization; drops degenerate slices.

    A slice is dropped when deflation against the kept basis shrinks it
    below DROP_TOL times its original norm (or it is exactly zero).
    """
    dim = rows.shape[1] if rows.size else 0
    q = np.empty((dim, min(len(ids), dim)))
    kept_ids: list[int] = []
    count = 0
    for row, cid in zip(rows, ids):
        orig = np.linalg.norm(row)
        if orig == 0.0:
            continue
        u = row.astype(np.float64, copy=True)
        if count:
            basis = q[:, :count]
            u -= basis @ (basis.T @ u)
            u -= basis @ (basis.T @ u)
        norm = np.linalg.norm(u)
        if norm < DROP_TOL * orig or count == dim:
            continue
        q[:, count] = u / norm
        kept_ids.append(cid)
        count += 1
    return [q[:, j].copy() for j in range(count)], kept_ids


def disassemble(
    pool: ComponentPool,
    offsets: tuple[tuple[int, int], ...],
    current_task: int,
    historical_only: bool = True,
    orthonormalize: bool = True,
) -> list[SliceBasis]:
    """Slice pool components into per-module bases.

    ``offsets`` must partition [0, pool.dim) contiguously, one (start,
    length) pair per module. With ``historical_only`` (the default) only
    components created on earlier tasks contribute, so a task's own
    directions never constrain its own updates.
    """
    pos = 0
    for start, length in offsets:
        if start != pos or length < 1:
            raise ShapeError("offsets must partition the pool dimension")
        pos += length
    if pos != pool.dim:
        raise ShapeError(
            f"offsets cover {pos} dims, pool has {pool.dim}"
        )
    selected = [
        k
        for k in range(len(pool.components))
        if not historical_only or pool.creation_task[k] < current_task
    ]
    bases = []
    for m, (start, length) in enumerate(offsets):
        ids = list(selected)
        rows = np.empty((len(ids), length))
        for j, k in enumerate(ids):
            rows[j] = pool.components[k][start : start + length]
        if orthonormalize:
            vectors, ids = _orthonormalize(rows, ids)
        else:
            keep = [j for j in range(len(ids)) if np.linalg.norm(rows[j]) > 0.0]
            vectors = [rows[j].copy() for j in keep]
            ids = [ids[j] for j in keep]
        bases.append(SliceBasis(m, vectors, orthonormalize, ids))
    return bases


def cut_gradient(grad_B: np.ndarray, basis: SliceBasis) -> np.ndarray:
    """Strip each gradient column of its sweep over the basis slices."""
    grad_B = np.asarray(grad_B, dtype=np.float64)
    if grad_B.ndim != 2:
        raise ShapeError("grad_B must be 2-D")
    if not basis.vectors:
        return grad_B.copy()
    v = np.stack(basis.vectors, axis=1)
    if v.shape[0] != grad_B.shape[0]:
        raise ShapeError(
            f"basis slices have {v.shape[0]} dims, gradient rows {grad_B.shape[0]}"
        )
    norms_sq = (v * v).sum(axis=0)
    if np.any(norms_sq == 0.0):
        raise ValidationError("basis contains a zero-norm slice")
    cut = grad_B - v @ ((v.T @ grad_B) / norms_sq[:, None])
    # Columns swallowed whole by the span retain only rounding noise whose
    # direction is arbitrary; snap them to a true zero update.
    residual = np.linalg.norm(cut, axis=0)
    cut[:, residual < ZERO_TOL * np.linalg.norm(grad_B, axis=0)] = 0.0
    return cut


def verify_orthogonality(cut_grad: np.ndarray, basis: SliceBasis) -> float:
    """Max |column . slice| / (|column| |slice|) over all pairs."""
    cut_grad = np.asarray(cut_grad, dtype=np.float64)
    if not basis.vectors:
        return 0.0
    v = np.stack(basis.vectors, axis=1)
    if v.shape[0] != cut_grad.shape[0]:
        raise ShapeError("basis does not match gradient rows")
    dots = np.abs(v.T @ cut_grad)
    denom = np.outer(
        np.linalg.norm(v, axis=0), np.linalg.norm(cut_grad, axis=0)
    ) + 1e-30
    return float((dots / denom).max())
