"""Binary checkpoint format for a component pool plus optional adapters.

Layout, all little-endian:

    8 bytes  magic ``DOCPCA1\\0``
    u32      stream dimension
    u32      component count
    u32      component cap (k_max)
    f64      amnesic factor l
    f64      tracking factor eps
    f64      residual threshold delta
    per component:
        u32  age
        u32  creation task
        f64 * dim  component data
    zero or more adapter blocks, until end of file:
        u32  m_dim
        u32  n_dim
        u32  rank r
        f64 * m_dim * n_dim  base weight, row-major
        f64 * m_dim * r      factor B, row-major
        f64 * r * n_dim      factor A, row-major

Parsing is all-or-nothing: a malformed file raises CheckpointError with
the failing byte offset and no state is constructed.
"""

from __future__ import annotations

import struct

import numpy as np

from .adapters import LoraAdapter, ToyNetwork
from .errors import CheckpointError, ValidationError
from .online_pca import ComponentPool

MAGIC = b"DOCPCA1\x00"
_HEADER = struct.Struct("<III")
_PCA_PARAMS = struct.Struct("<ddd")
_COMPONENT_HEAD = struct.Struct("<II")
_ADAPTER_HEAD = struct.Struct("<III")


def serialize_checkpoint(pool: ComponentPool, net: ToyNetwork | None) -> bytes:
    """Encode a pool and (optionally) a network's adapters."""
    out = [MAGIC]
    out.append(_HEADER.pack(pool.dim, len(pool.components), pool.k_max))
    out.append(
        _PCA_PARAMS.pack(pool.amnesic_l, pool.tracking_eps, pool.residual_delta)
    )
    for v, age, task in zip(pool.components, pool.ages, pool.creation_task):
        if age < 0 or task < 0:
            raise ValidationError("component ages and tasks must be >= 0")
        out.append(_COMPONENT_HEAD.pack(age, task))
        out.append(np.ascontiguousarray(v, dtype="<f8").tobytes())
    if net is not None:
        for ad in net.adapters:
            out.append(_ADAPTER_HEAD.pack(ad.m_dim, ad.n_dim, ad.rank_r))
            out.append(np.ascontiguousarray(ad.base_weight, dtype="<f8").tobytes())
            out.append(np.ascontiguousarray(ad.factor_B, dtype="<f8").tobytes())
            out.append(np.ascontiguousarray(ad.factor_A, dtype="<f8").tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, count: int, what: str) -> bytes:
        if self.pos + count > len(self.data):
            raise CheckpointError(f"truncated while reading {what}", self.pos)
        chunk = self.data[self.pos : self.pos + count]
        self.pos += count
        return chunk

    def floats(self, count: int, what: str) -> np.ndarray:
        raw = self.take(count * 8, what)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64)


def parse_checkpoint(data: bytes) -> tuple[ComponentPool, ToyNetwork | None]:
    """Decode bytes produced by serialize_checkpoint."""
    r = _Reader(data)
    magic = r.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}", 0)
    dim, count, k_max = _HEADER.unpack(r.take(_HEADER.size, "pool header"))
    if dim < 1:
        raise CheckpointError("pool dimension must be positive", len(MAGIC))
    l, eps, delta = _PCA_PARAMS.unpack(r.take(_PCA_PARAMS.size, "pca params"))
    components, ages, tasks = [], [], []
    for i in range(count):
        age, task = _COMPONENT_HEAD.unpack(
            r.take(_COMPONENT_HEAD.size, f"component {i} header")
        )
        components.append(r.floats(dim, f"component {i} data"))
        ages.append(age)
        tasks.append(task)
    adapters = []
    while r.pos < len(r.data):
        start = r.pos
        m, n, rank = _ADAPTER_HEAD.unpack(
            r.take(_ADAPTER_HEAD.size, f"adapter {len(adapters)} header")
        )
        if m < 1 or n < 1 or rank < 1:
            raise CheckpointError("adapter dims must be positive", start)
        w = r.floats(m * n, "base weight").reshape(m, n)
        b = r.floats(m * rank, "factor B").reshape(m, rank)
        a = r.floats(rank * n, "factor A").reshape(rank, n)
        adapters.append(LoraAdapter(w, b, a, rank, len(adapters)))
    pool = ComponentPool(
        dim=dim,
        k_max=k_max,
        amnesic_l=l,
        tracking_eps=eps,
        residual_delta=delta,
        components=components,
        ages=ages,
        creation_task=tasks,
        current_task=max(tasks, default=0),
    )
    net = None
    if adapters:
        hidden = adapters[0].m_dim if len(adapters) > 1 else adapters[0].n_dim
        net = ToyNetwork(
            adapters=adapters,
            activation="tanh",
            input_dim=adapters[0].n_dim,
            hidden_dim=hidden,
            class_count=adapters[-1].m_dim,
        )
    return pool, net


def save_checkpoint(path, pool: ComponentPool, net: ToyNetwork | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_checkpoint(pool, net))


def load_checkpoint(path) -> tuple[ComponentPool, ToyNetwork | None]:
    with open(path, "rb") as fh:
        return parse_checkpoint(fh.read())
