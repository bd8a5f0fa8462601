"""Sequential fine-tuning over a task stream, with and without cuts.

One training step in the ``doc`` arm:

1. forward/backward on the current batch (exact gradients);
2. build the functional direction from the *uncut* gradients;
3. fold it into the component pool and retune the tracking factor;
4. slice historical components per module and cut each B-gradient
   orthogonal to them;
5. apply the cut B-gradients and the untouched A-gradients.

``seq_lora`` skips 2-4 entirely. ``doc_ablation`` runs the same loop but
freezes the pool after the first ``ablation_init_fraction`` of each task's
steps, so cuts happen against stale directions. Earlier tasks' training
data is regenerated per task and dropped; a per-run audit records which
task's training split every batch came from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .adapters import ToyNetwork, apply_update, backward, build_network, forward
from .checkpoint import serialize_checkpoint
from .directions import increment_direction
from .errors import DivergenceError, ValidationError
from .metrics import AccuracyMatrix
from .online_pca import RESIDUAL_FLOOR, ComponentPool
from .projection import cut_gradient, disassemble, verify_orthogonality
from .tasks import TaskData, TaskSpec, generate_task

METHODS = ("doc", "seq_lora", "doc_ablation", "per_task_reference")
STREAM_METHODS = ("doc", "seq_lora", "doc_ablation")


@dataclass
class RunConfig:
    """Hyperparameters for one (method, seed) run."""

    method: str = "doc"
    seed: int = 0
    lr: float = 0.0125
    batch_size: int = 16
    steps_per_task: int = 500
    lora_rank: int = 8
    input_dim: int = 32
    hidden_dim: int = 64
    class_count: int = 4
    task_count: int = 5
    samples_train: int = 2000
    samples_eval: int = 1000
    noise_scale: float = 0.3
    amnesic_l: float = 2.0
    eps_cap: float = 0.1
    residual_delta: float = 0.1
    cap_increment: int = 48
    ablation_init_fraction: float = 0.1
    literal_cut_mode: bool = False
    historical_only: bool = True
    log_every: int = 10

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(
                f"method must be one of {METHODS}, got {self.method!r}"
            )
        if self.lr <= 0 or not math.isfinite(self.lr):
            raise ValidationError("lr must be positive and finite")
        if min(self.batch_size, self.steps_per_task, self.task_count) < 1:
            raise ValidationError("batch_size, steps_per_task, task_count >= 1")
        if not 0.0 < self.ablation_init_fraction <= 1.0:
            raise ValidationError("ablation_init_fraction must lie in (0, 1]")
        if self.cap_increment < 0:
            raise ValidationError("cap_increment must be >= 0")
        if self.log_every < 1:
            raise ValidationError("log_every must be >= 1")


@dataclass
class StepLog:
    """One row of the per-step training log."""

    step: int
    task: int
    loss: float
    residual_rate: float
    component_count: int
    epsilon: float


@dataclass
class RunRecord:
    """Everything one stream run produced."""

    method: str
    seed: int
    task_ids: list[int]
    steps: list[StepLog]
    accuracy: AccuracyMatrix
    audit_max_dot: float = 0.0
    data_audit: dict[tuple[int, int], int] = field(default_factory=dict)
    checkpoint: bytes = b""


def _batch_rng(cfg: RunConfig, task_id: int) -> np.random.Generator:
    # Shared by streams and isolated reference runs so that a task trained
    # in stream position 1 sees the exact same batches either way.
    return np.random.default_rng([cfg.seed, 0x62, task_id])


def _build_net(cfg: RunConfig) -> ToyNetwork:
    return build_network(
        input_dim=cfg.input_dim,
        hidden_dim=cfg.hidden_dim,
        class_count=cfg.class_count,
        rank=cfg.lora_rank,
        seed=cfg.seed,
    )


def _spec_from_cfg(cfg: RunConfig, spec: TaskSpec) -> TaskSpec:
    return replace(
        spec,
        class_count=cfg.class_count,
        samples_train=cfg.samples_train,
        samples_eval=cfg.samples_eval,
        input_dim=cfg.input_dim,
    )


def evaluate_accuracy(net: ToyNetwork, data: TaskData) -> float:
    logits, _ = forward(net, data.eval_x)
    return float(np.mean(np.argmax(logits, axis=0) == data.eval_y))


def _train_one_task(
    cfg: RunConfig,
    net: ToyNetwork,
    pool: ComponentPool | None,
    data: TaskData,
    task_pos: int,
    step_offset: int,
    record: RunRecord,
    step_hook=None,
) -> None:
    """Run cfg.steps_per_task batches of one task, logging each step."""
    # The pool observes every stream method's increments; only the doc
    # variants feed it back into the update as a gradient cut.
    uses_pool = pool is not None and cfg.method in STREAM_METHODS
    cuts = cfg.method in ("doc", "doc_ablation")
    rng = _batch_rng(cfg, data.task_id)
    freeze_after = math.ceil(cfg.ablation_init_fraction * cfg.steps_per_task)
    offsets = net.increment_offsets()
    for step_in_task in range(1, cfg.steps_per_task + 1):
        global_step = step_offset + step_in_task
        if step_hook is not None:
            step_hook(net, pool, global_step, task_pos, step_in_task)
        if (
            uses_pool
            and cfg.method == "doc_ablation"
            and step_in_task == freeze_after + 1
        ):
            pool.freeze()
        x, y = data.train_batch(rng, cfg.batch_size)
        key = (task_pos, data.task_id)
        record.data_audit[key] = record.data_audit.get(key, 0) + 1
        _, cache = forward(net, x)
        loss, grads = backward(net, cache, y)
        if not math.isfinite(loss):
            record.steps.append(
                StepLog(global_step, task_pos, loss, float("nan"), 0, float("nan"))
            )
            raise DivergenceError(
                f"non-finite loss at step {global_step} (task {task_pos})"
            )
        rate = float("nan")
        count = 0
        eps = float("nan")
        if uses_pool:
            h = increment_direction(net, grads, cfg.lr, step_index=global_step)
            h_norm = float(np.linalg.norm(h.data))
            # Overflowing increments mean the trajectory diverged; abort
            # before they poison the pool with non-finite components.
            if not math.isfinite(h_norm):
                raise DivergenceError(
                    f"non-finite functional direction at step {global_step} "
                    f"(task {task_pos})"
                )
            if h_norm >= RESIDUAL_FLOOR:
                report = pool.update(h)
                if report is not None:
                    rate = report.residual_rate
                    if not math.isfinite(rate):
                        raise DivergenceError(
                            f"non-finite residual rate at step {global_step} "
                            f"(task {task_pos})"
                        )
                    if not pool.frozen:
                        pool.adjust_tracking(rate)
            count = len(pool)
            eps = pool.tracking_eps
            if cuts:
                bases = disassemble(
                    pool,
                    offsets,
                    current_task=task_pos,
                    historical_only=cfg.historical_only,
                    orthonormalize=not cfg.literal_cut_mode,
                )
                cut_b = []
                for gb, basis in zip(grads.grad_B, bases):
                    cut = cut_gradient(gb, basis)
                    if basis.orthonormalized:
                        dot = verify_orthogonality(cut, basis)
                        if dot > record.audit_max_dot:
                            record.audit_max_dot = dot
                    cut_b.append(cut)
                grads.grad_B = cut_b
        apply_update(net, grads, cfg.lr)
        record.steps.append(
            StepLog(global_step, task_pos, loss, rate, count, eps)
        )


def run_stream(
    cfg: RunConfig,
    tasks: list[TaskSpec],
    *,
    net: ToyNetwork | None = None,
    pool: ComponentPool | None = None,
    start_index: int = 0,
    step_hook=None,
    task_end_hook=None,
) -> RunRecord:
    """Train sequentially over the task stream and fill the accuracy matrix.

    The config is authoritative for data geometry: each spec's class count,
    sample counts and input dimension are overridden from ``cfg`` so the
    stream always matches the network. Specs contribute identity and seeds.

    Passing ``net``/``pool``/``start_index`` resumes an interrupted stream
    from a task boundary; the resumed trajectory is bit-identical to the
    uninterrupted one because batch sampling is seeded per task.
    """
    if cfg.method not in STREAM_METHODS:
        raise ValidationError(
            f"run_stream handles {STREAM_METHODS}; use reference_accuracies "
            f"for {cfg.method!r}"
        )
    if not tasks:
        raise ValidationError("task stream is empty")
    if len({s.task_id for s in tasks}) != len(tasks):
        raise ValidationError("task ids must be distinct")
    if not 0 <= start_index < len(tasks):
        raise ValidationError(f"start_index {start_index} outside stream")
    if (net is None) != (pool is None) or (net is None) != (start_index == 0):
        raise ValidationError(
            "resume needs net, pool and start_index together"
        )

    if net is None:
        net = _build_net(cfg)
    if pool is None:
        pool = ComponentPool(
            dim=net.increment_dim(),
            k_max=0,
            amnesic_l=cfg.amnesic_l,
            residual_delta=cfg.residual_delta,
            eps_cap=cfg.eps_cap,
        )
    else:
        pool.eps_cap = cfg.eps_cap
    record = RunRecord(
        method=cfg.method,
        seed=cfg.seed,
        task_ids=[s.task_id for s in tasks],
        steps=[],
        accuracy=AccuracyMatrix(task_count=len(tasks)),
    )
    for index in range(start_index, len(tasks)):
        task_pos = index + 1
        spec = _spec_from_cfg(cfg, tasks[index])
        data = generate_task(spec, noise_scale=cfg.noise_scale)
        pool.raise_cap(cfg.cap_increment)
        pool.current_task = task_pos
        pool.unfreeze()
        _train_one_task(
            cfg,
            net,
            pool,
            data,
            task_pos,
            index * cfg.steps_per_task,
            record,
            step_hook=step_hook,
        )
        for past in range(1, task_pos + 1):
            past_data = generate_task(
                _spec_from_cfg(cfg, tasks[past - 1]), noise_scale=cfg.noise_scale
            )
            record.accuracy.set(
                past, task_pos, evaluate_accuracy(net, past_data)
            )
        if task_end_hook is not None:
            task_end_hook(net, pool, task_pos)
    record.checkpoint = serialize_checkpoint(pool, net)
    return record


def reference_accuracies(cfg: RunConfig, tasks: list[TaskSpec]) -> list[float]:
    """Accuracy of a fresh network trained on each task in isolation.

    Every reference run reuses the stream's initialization seed and the
    task's batch seed, so a task placed first in a stream reproduces its
    reference accuracy exactly.
    """
    if not tasks:
        raise ValidationError("task stream is empty")
    out = []
    ref_cfg = replace(cfg, method="per_task_reference")
    for spec in tasks:
        net = _build_net(ref_cfg)
        data = generate_task(_spec_from_cfg(ref_cfg, spec), noise_scale=cfg.noise_scale)
        record = RunRecord(
            method="per_task_reference",
            seed=cfg.seed,
            task_ids=[spec.task_id],
            steps=[],
            accuracy=AccuracyMatrix(task_count=1),
        )
        _train_one_task(ref_cfg, net, None, data, 1, 0, record)
        out.append(evaluate_accuracy(net, data))
    return out
