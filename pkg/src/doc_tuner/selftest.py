"""Convergence self-test: streaming tracker vs an exact batch eigensolve.

Feeds a fixed-spectrum Gaussian stream through a pool and compares the top
components against eigenvectors of the stream's empirical second moment.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .online_pca import ComponentPool
from .tasks import _random_orthogonal


@dataclass(frozen=True)
class SelftestResult:
    cosines: tuple[float, ...]
    threshold: float
    passed: bool
    component_count: int
    elapsed_seconds: float


def pca_selftest(
    dim: int = 20,
    updates: int = 5000,
    top_k: int = 3,
    threshold: float = 0.98,
    seed: int = 0,
) -> SelftestResult:
    """Stream Gaussian samples with spectrum (10, 5, 2, 1, ..., 1).

    Returns per-component absolute cosines between the pool's first
    ``top_k`` components and the matching eigenvectors of the empirical
    uncentered covariance of the very same samples.
    """
    rng = np.random.default_rng([seed, 0x7063])
    spectrum = np.ones(dim)
    spectrum[:3] = [10.0, 5.0, 2.0]
    basis = _random_orthogonal(dim, rng)
    scales = np.sqrt(spectrum)
    samples = (basis * scales) @ rng.standard_normal((dim, updates))

    pool = ComponentPool(dim=dim, k_max=dim, amnesic_l=2.0, tracking_eps=0.0)
    start = time.perf_counter()
    for i in range(updates):
        pool.update(samples[:, i])
    elapsed = time.perf_counter() - start

    second_moment = (samples @ samples.T) / updates
    eigvals, eigvecs = np.linalg.eigh(second_moment)
    order = np.argsort(eigvals)[::-1]
    eigvecs = eigvecs[:, order]

    cosines = []
    for k in range(top_k):
        v = pool.components[k]
        cosines.append(float(abs(v @ eigvecs[:, k]) / np.linalg.norm(v)))
    passed = all(c >= threshold for c in cosines)
    return SelftestResult(
        cosines=tuple(cosines),
        threshold=threshold,
        passed=passed,
        component_count=len(pool),
        elapsed_seconds=elapsed,
    )
