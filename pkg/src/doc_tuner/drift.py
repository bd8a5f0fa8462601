"""Drift probes: how far training walks away from where it started.

A fixed set of anchor datapoints (held-out samples of the first task) is
probed at every logging interval while a stream trains. Per anchor the
probe measures, without touching the run's trajectory:

* cosine between the current full-LoRA gradient and the first probe's;
* cosine between the current gradient and its running mean;
* mean cosine of every B column against its reference value;
* cosine between the anchor's current coordinates (projections onto pool
  components) and its coordinates at the end of the first task, once
  under the live tracked pool and once under a clone frozen at that
  moment.

The coordinate pair is the interesting one: if the tracked pool follows
the drift, coordinates stay aligned long after the frozen snapshot's have
decayed. Probe gradients use a unit learning rate; cosines are invariant
to that scale. Cosines of identical vectors count as 1 even at zero norm
(nothing moved); an anchor whose gradient vanishes on one side only is
excluded from that probe point and counted in ``flagged``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .adapters import ToyNetwork, backward, forward
from .directions import coord, increment_direction
from .errors import ValidationError
from .online_pca import ComponentPool
from .tasks import TaskSpec, generate_task
from .training import RunConfig, RunRecord, _spec_from_cfg, run_stream

SERIES_NAMES = (
    "grad_vs_first",
    "grad_vs_mean",
    "b_similarity",
    "coord_tracked",
    "coord_frozen",
)


@dataclass
class DriftSeries:
    """One probed quantity: per probe step, mean and std across anchors."""

    steps: list[int] = field(default_factory=list)
    tasks: list[int] = field(default_factory=list)
    mean: list[float] = field(default_factory=list)
    std: list[float] = field(default_factory=list)

    def append(self, step: int, task: int, values: np.ndarray) -> None:
        kept = values[~np.isnan(values)]
        self.steps.append(step)
        self.tasks.append(task)
        if kept.size:
            self.mean.append(float(np.mean(kept)))
            self.std.append(float(np.std(kept)))
        else:
            self.mean.append(float("nan"))
            self.std.append(float("nan"))


@dataclass
class DriftProbe:
    """All series produced by one probed run, plus per-anchor detail."""

    anchor_x: np.ndarray
    anchor_y: np.ndarray
    grad_vs_first: DriftSeries
    grad_vs_mean: DriftSeries
    b_similarity: DriftSeries
    coord_tracked: DriftSeries
    coord_frozen: DriftSeries
    coord_tracked_anchors: list[np.ndarray]
    coord_frozen_anchors: list[np.ndarray]
    flagged: int
    record: RunRecord

    def series(self, name: str) -> DriftSeries:
        if name not in SERIES_NAMES:
            raise ValidationError(f"unknown series {name!r}")
        return getattr(self, name)


def _cosine(u: np.ndarray, v: np.ndarray) -> float | None:
    """Cosine with zero handling: identical-zero is 1, one-sided zero None."""
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 and nv == 0.0:
        return 1.0
    if nu == 0.0 or nv == 0.0:
        return None
    return float(u @ v) / (nu * nv)


def _flat_gradient(net: ToyNetwork, x: np.ndarray, y: int):
    _, cache = forward(net, x[:, None])
    _, grads = backward(net, cache, np.array([y]))
    flat = np.concatenate(
        [g.ravel() for g in grads.grad_B] + [g.ravel() for g in grads.grad_A]
    )
    return flat, increment_direction(net, grads, lr=1.0)


class _ProbeState:
    def __init__(self, cfg: RunConfig, anchor_x, anchor_y):
        self.cfg = cfg
        self.anchor_x = anchor_x
        self.anchor_y = anchor_y
        self.n = anchor_x.shape[1]
        self.grad_refs: list[np.ndarray] | None = None
        self.grad_sums: list[np.ndarray] | None = None
        self.probe_count = 0
        self.b_refs: list[np.ndarray] | None = None
        self.frozen_pool: ComponentPool | None = None
        self.coord_refs: list[np.ndarray] | None = None
        self.ref_len = 0
        self.flagged = 0
        self.series = {name: DriftSeries() for name in SERIES_NAMES}
        self.coord_tracked_anchors: list[np.ndarray] = []
        self.coord_frozen_anchors: list[np.ndarray] = []

    def _maybe_set_b_refs(self, net: ToyNetwork) -> None:
        if self.b_refs is not None:
            return
        if any(np.linalg.norm(ad.factor_B) > 0.0 for ad in net.adapters):
            self.b_refs = [ad.factor_B.copy() for ad in net.adapters]

    def _b_similarity(self, net: ToyNetwork) -> np.ndarray:
        # Before any B column has moved off zero there is no reference yet
        # and nothing has drifted: similarity is exactly 1.
        if self.b_refs is None:
            return np.array([1.0])
        values = []
        for ad, ref in zip(net.adapters, self.b_refs):
            for col in range(ad.factor_B.shape[1]):
                c = _cosine(ad.factor_B[:, col], ref[:, col])
                if c is None:
                    self.flagged += 1
                else:
                    values.append(c)
        return np.array(values) if values else np.array([float("nan")])

    def on_step(self, net, pool, global_step, task_pos, step_in_task) -> None:
        if not (global_step == 1 or global_step % self.cfg.log_every == 0):
            return
        self._maybe_set_b_refs(net)
        grads, increments = [], []
        for i in range(self.n):
            g, h = _flat_gradient(net, self.anchor_x[:, i], int(self.anchor_y[i]))
            grads.append(g)
            increments.append(h)
        if self.grad_refs is None:
            self.grad_refs = [g.copy() for g in grads]
            self.grad_sums = [np.zeros_like(g) for g in grads]
        vs_first = np.empty(self.n)
        vs_mean = np.empty(self.n)
        self.probe_count += 1
        for i, g in enumerate(grads):
            self.grad_sums[i] += g
            running_mean = self.grad_sums[i] / self.probe_count
            for out, other in ((vs_first, self.grad_refs[i]), (vs_mean, running_mean)):
                c = _cosine(g, other)
                if c is None:
                    self.flagged += 1
                    out[i] = float("nan")
                else:
                    out[i] = c
        self.series["grad_vs_first"].append(global_step, task_pos, vs_first)
        self.series["grad_vs_mean"].append(global_step, task_pos, vs_mean)
        self.series["b_similarity"].append(
            global_step, task_pos, self._b_similarity(net)
        )
        if self.frozen_pool is not None:
            tracked = np.empty(self.n)
            frozen = np.empty(self.n)
            for i, h in enumerate(increments):
                ct = coord(pool, h)[: self.ref_len]
                cf = coord(self.frozen_pool, h)
                for out, now, ref in (
                    (tracked, ct, self.coord_refs[i][: self.ref_len]),
                    (frozen, cf, self.coord_refs[i]),
                ):
                    c = _cosine(now, ref)
                    if c is None:
                        self.flagged += 1
                        out[i] = float("nan")
                    else:
                        out[i] = c
            self.series["coord_tracked"].append(global_step, task_pos, tracked)
            self.series["coord_frozen"].append(global_step, task_pos, frozen)
            self.coord_tracked_anchors.append(tracked)
            self.coord_frozen_anchors.append(frozen)

    def on_task_end(self, net, pool, task_pos) -> None:
        if task_pos != 1:
            return
        self.frozen_pool = pool.clone()
        self.frozen_pool.freeze()
        self.ref_len = len(pool)
        self.coord_refs = []
        for i in range(self.n):
            _, h = _flat_gradient(net, self.anchor_x[:, i], int(self.anchor_y[i]))
            self.coord_refs.append(coord(self.frozen_pool, h))


def run_drift_probe(
    cfg: RunConfig, tasks: list[TaskSpec], anchor_count: int = 8
) -> DriftProbe:
    """Run the stream under probes anchored on first-task eval samples."""
    if anchor_count < 1:
        raise ValidationError("anchor_count must be positive")
    if not tasks:
        raise ValidationError("task stream is empty")
    first = generate_task(_spec_from_cfg(cfg, tasks[0]), noise_scale=cfg.noise_scale)
    if first.eval_y.shape[0] < anchor_count:
        raise ValidationError("first task has fewer eval samples than anchors")
    anchor_x = first.eval_x[:, :anchor_count].copy()
    anchor_y = first.eval_y[:anchor_count].copy()
    state = _ProbeState(cfg, anchor_x, anchor_y)
    record = run_stream(
        cfg,
        tasks,
        step_hook=state.on_step,
        task_end_hook=state.on_task_end,
    )
    return DriftProbe(
        anchor_x=anchor_x,
        anchor_y=anchor_y,
        grad_vs_first=state.series["grad_vs_first"],
        grad_vs_mean=state.series["grad_vs_mean"],
        b_similarity=state.series["b_similarity"],
        coord_tracked=state.series["coord_tracked"],
        coord_frozen=state.series["coord_frozen"],
        coord_tracked_anchors=state.coord_tracked_anchors,
        coord_frozen_anchors=state.coord_frozen_anchors,
        flagged=state.flagged,
        record=record,
    )
