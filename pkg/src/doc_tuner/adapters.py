"""LoRA-adapted linear stack with exact in-module reverse-mode gradients.

The architecture family is fixed (stacked linear layers, elementwise
activation, softmax cross-entropy head), so forward and backward are written
out by hand rather than pulled from an autodiff framework. Inputs are
column-major: a batch is an ``(input_dim, batch_size)`` array and every
per-layer quantity keeps samples in columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ShapeError, ValidationError

ACTIVATIONS = ("tanh", "identity")


@dataclass
class LoraAdapter:
    """Frozen base matrix plus trainable low-rank factors for one layer.

    The layer computes ``base_weight @ x + factor_B @ (factor_A @ x)``.
    ``base_weight`` never changes after construction; only the factors are
    trainable. ``factor_B`` starts at zero so the adapted map initially
    equals the base map.
    """

    base_weight: np.ndarray
    factor_B: np.ndarray
    factor_A: np.ndarray
    rank_r: int
    module_index: int

    def __post_init__(self):
        if self.base_weight.ndim != 2:
            raise ShapeError("base_weight must be 2-D")
        if self.rank_r < 1:
            raise ValidationError(f"rank_r must be >= 1, got {self.rank_r}")
        m, n = self.base_weight.shape
        if self.factor_B.shape != (m, self.rank_r):
            raise ShapeError(
                f"factor_B shape {self.factor_B.shape} != {(m, self.rank_r)}"
            )
        if self.factor_A.shape != (self.rank_r, n):
            raise ShapeError(
                f"factor_A shape {self.factor_A.shape} != {(self.rank_r, n)}"
            )

    @property
    def m_dim(self) -> int:
        return self.base_weight.shape[0]

    @property
    def n_dim(self) -> int:
        return self.base_weight.shape[1]


@dataclass
class ToyNetwork:
    """A small frozen-base classifier made of LoRA-adapted linear layers."""

    adapters: list[LoraAdapter]
    activation: str
    input_dim: int
    hidden_dim: int
    class_count: int

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.activation!r}")
        if not self.adapters:
            raise ValidationError("network needs at least one adapter")

    @property
    def module_count(self) -> int:
        return len(self.adapters)

    def increment_dim(self) -> int:
        """Length of the concatenated per-module output increment."""
        return sum(a.m_dim for a in self.adapters)

    def increment_offsets(self) -> tuple[tuple[int, int], ...]:
        """(start, length) of each module's slice in the concatenation."""
        offsets, start = [], 0
        for a in self.adapters:
            offsets.append((start, a.m_dim))
            start += a.m_dim
        return tuple(offsets)


@dataclass
class ForwardCache:
    """Per-layer inputs and pre-activations retained for backward."""

    inputs: list[np.ndarray] = field(repr=False)
    preacts: list[np.ndarray] = field(repr=False)


@dataclass
class GradientBundle:
    """Loss gradients of the trainable factors plus batch-averaged inputs."""

    grad_B: list[np.ndarray]
    grad_A: list[np.ndarray]
    module_inputs: list[np.ndarray]


def build_network(
    *,
    input_dim: int = 32,
    hidden_dim: int = 64,
    class_count: int = 4,
    rank: int = 4,
    hidden_layers: int = 2,
    activation: str = "tanh",
    seed: int = 0,
) -> ToyNetwork:
    """Construct the classifier with a deterministic random initialization.

    Base weights are Gaussian scaled by 1/sqrt(fan_in) and frozen. Each
    adapter starts with factor_B = 0 and factor_A uniform in
    [-1/sqrt(n_dim), 1/sqrt(n_dim)], so training starts from the base map.
    """
    if min(input_dim, hidden_dim, class_count, rank, hidden_layers) < 1:
        raise ValidationError("network dimensions must be positive")
    dims = [input_dim] + [hidden_dim] * hidden_layers + [class_count]
    rng = np.random.default_rng([seed, 0x6E6574])
    adapters = []
    for i, (n, m) in enumerate(zip(dims[:-1], dims[1:])):
        w = rng.standard_normal((m, n)) / math.sqrt(n)
        b = np.zeros((m, rank))
        a = rng.uniform(-1.0, 1.0, size=(rank, n)) / math.sqrt(n)
        adapters.append(LoraAdapter(w, b, a, rank, i))
    return ToyNetwork(adapters, activation, input_dim, hidden_dim, class_count)


def forward(net: ToyNetwork, batch: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Run the network on a column-major batch, returning logits and cache."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ShapeError(f"batch must be 2-D, got ndim={batch.ndim}")
    if batch.shape[0] != net.input_dim:
        raise ShapeError(
            f"batch has {batch.shape[0]} rows, network expects {net.input_dim}"
        )
    if batch.shape[1] == 0:
        raise ValidationError("batch is empty")
    if not np.all(np.isfinite(batch)):
        raise ValidationError("batch contains non-finite values")
    x = batch
    inputs, preacts = [], []
    last = net.module_count - 1
    for i, ad in enumerate(net.adapters):
        if x.shape[0] != ad.n_dim:
            raise ShapeError(f"module {i} expects {ad.n_dim} rows, got {x.shape[0]}")
        inputs.append(x)
        z = ad.base_weight @ x + ad.factor_B @ (ad.factor_A @ x)
        preacts.append(z)
        if i < last:
            x = np.tanh(z) if net.activation == "tanh" else z
    return preacts[-1], ForwardCache(inputs=inputs, preacts=preacts)


def _check_cache(net: ToyNetwork, cache: ForwardCache) -> None:
    if len(cache.inputs) != net.module_count or len(cache.preacts) != net.module_count:
        raise ShapeError("cache does not match network layout")
    for ad, x, z in zip(net.adapters, cache.inputs, cache.preacts):
        if x.shape[0] != ad.n_dim or z.shape[0] != ad.m_dim:
            raise ShapeError("cache does not match network layout")


def backward(
    net: ToyNetwork, cache: ForwardCache, labels: np.ndarray
) -> tuple[float, GradientBundle]:
    """Mean softmax cross-entropy and its exact gradients w.r.t. B and A.

    Returns the scalar loss and a GradientBundle whose ``module_inputs`` are
    the batch-averaged inputs of each adapter (the batch mean stands in for
    a token average). Base weights receive no gradient by construction.
    """
    _check_cache(net, cache)
    n = cache.inputs[0].shape[1]
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != n:
        raise ShapeError(f"labels must be a length-{n} vector")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValidationError("labels must be integers")
    if labels.min() < 0 or labels.max() >= net.class_count:
        raise ValidationError(
            f"labels must lie in [0, {net.class_count}), got "
            f"[{labels.min()}, {labels.max()}]"
        )

    logits = cache.preacts[-1]
    zmax = logits.max(axis=0, keepdims=True)
    expz = np.exp(logits - zmax)
    denom = expz.sum(axis=0, keepdims=True)
    cols = np.arange(n)
    log_denom = np.log(denom[0]) + zmax[0]
    loss = float(np.mean(log_denom - logits[labels, cols]))

    dz = expz / denom
    dz[labels, cols] -= 1.0
    dz /= n

    m_count = net.module_count
    grad_B: list[np.ndarray] = [np.empty(0)] * m_count
    grad_A: list[np.ndarray] = [np.empty(0)] * m_count
    module_inputs: list[np.ndarray] = [np.empty(0)] * m_count
    for i in range(m_count - 1, -1, -1):
        ad = net.adapters[i]
        x = cache.inputs[i]
        grad_B[i] = dz @ (ad.factor_A @ x).T
        grad_A[i] = (ad.factor_B.T @ dz) @ x.T
        module_inputs[i] = x.mean(axis=1)
        if i > 0:
            dx = (ad.base_weight + ad.factor_B @ ad.factor_A).T @ dz
            if net.activation == "tanh":
                dz = dx * (1.0 - x * x)
            else:
                dz = dx
    return loss, GradientBundle(grad_B, grad_A, module_inputs)


def apply_update(net: ToyNetwork, grads: GradientBundle, lr: float) -> ToyNetwork:
    """Gradient-descent step on the low-rank factors only, in place.

    Rejects non-finite gradients before touching any parameter, so a
    diverged step never leaves the network half-updated.
    """
    if not math.isfinite(lr):
        raise ValidationError("learning rate must be finite")
    if len(grads.grad_B) != net.module_count or len(grads.grad_A) != net.module_count:
        raise ShapeError("gradient bundle does not match network layout")
    for ad, gb, ga in zip(net.adapters, grads.grad_B, grads.grad_A):
        if gb.shape != ad.factor_B.shape or ga.shape != ad.factor_A.shape:
            raise ShapeError(
                f"gradient shapes {gb.shape}/{ga.shape} do not match module "
                f"{ad.module_index}"
            )
        if not (np.all(np.isfinite(gb)) and np.all(np.isfinite(ga))):
            raise DivergenceError(
                f"non-finite gradient for module {ad.module_index}"
            )
    for ad, gb, ga in zip(net.adapters, grads.grad_B, grads.grad_A):
        ad.factor_B -= lr * gb
        ad.factor_A -= lr * ga
    return net
