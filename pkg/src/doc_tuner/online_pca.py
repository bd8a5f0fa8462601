"""Streaming principal-component tracking with residual-triggered growth.

The pool maintains unnormalized component vectors: each one points along an
estimated eigenvector of the input stream's (uncentered) second moment and
its magnitude estimates the matching eigenvalue. One update folds a new
vector into every component in dominance order and then decides whether the
left-over residual deserves a component of its own.

For component k with per-component age ``t_k`` (its own update count) the
blend weight is

    eta = clamp((t_k - l) / (t_k + 1) * (1 - eps), 0, 1)

where ``l`` is the amnesic factor (older samples fade; l = 2 by default)
and ``eps`` is the tracking factor that deliberately shortens the memory so
the estimate can follow a drifting distribution. The component update and
the deflation of the running residual ``h*`` are

    v_k <- eta * v_k + (1 - eta) * h* * (h* . v_k) / |v_k|
    h*  <- h* - (h* . v_k / |v_k|^2) * v_k        (with the updated v_k)

Young components (t_k <= l) get eta = 0 and follow the data alone. After
the sweep, if ``|h*| / |h| > residual_delta`` and the pool is below its
cap, ``h*`` is appended as a new component with age 0.

``adjust_tracking`` is a one-line controller for eps: the more of the
stream the pool fails to explain, the harder the components chase it,
saturating at ``eps_cap``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantError, ShapeError, ValidationError

RESIDUAL_FLOOR = 1e-12


@dataclass(frozen=True)
class UpdateReport:
    """What one pool update did: residual share, growth, blend weight."""

    residual_rate: float
    appended: bool
    components_after: int
    eta_used: float


@dataclass
class ComponentPool:
    """Ordered set of tracked components over a fixed-dimension stream."""

    dim: int
    k_max: int = 0
    amnesic_l: float = 2.0
    tracking_eps: float = 0.0
    residual_delta: float = 0.1
    eps_cap: float = 0.1
    components: list[np.ndarray] = field(default_factory=list)
    ages: list[int] = field(default_factory=list)
    creation_task: list[int] = field(default_factory=list)
    current_task: int = 0
    frozen: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("pool dimension must be positive")
        if self.k_max < 0:
            raise ValidationError("k_max must be non-negative")
        if not 0.0 <= self.tracking_eps < 1.0:
            raise ValidationError("tracking_eps must lie in [0, 1)")
        if self.residual_delta < 0.0:
            raise ValidationError("residual_delta must be non-negative")

    def __len__(self) -> int:
        return len(self.components)

    def _as_vector(self, h) -> np.ndarray:
        vec = np.asarray(getattr(h, "data", h), dtype=np.float64)
        if vec.ndim != 1 or vec.shape[0] != self.dim:
            raise ShapeError(f"input must have shape ({self.dim},)")
        return vec

    def _eta(self, age: int) -> float:
        raw = (age - self.amnesic_l) / (age + 1.0) * (1.0 - self.tracking_eps)
        return min(max(raw, 0.0), 1.0)

    def update(self, h) -> UpdateReport | None:
        """Fold one stream vector into the pool.

        Returns the UpdateReport, or None as a skip signal when ``h`` has
        zero norm. A frozen pool computes the report read-only and mutates
        nothing.
        """
        vec = self._as_vector(h)
        h_norm = float(np.linalg.norm(vec))
        if h_norm == 0.0:
            return None
        first_eta = self._eta(self.ages[0]) if self.components else 0.0
        if self.frozen:
            return UpdateReport(
                residual_rate=self.residual_rate(vec),
                appended=False,
                components_after=len(self.components),
                eta_used=first_eta,
            )

        h_star = vec.copy()
        for k in range(len(self.components)):
            if np.linalg.norm(h_star) < RESIDUAL_FLOOR:
                break
            v = self.components[k]
            eta = self._eta(self.ages[k])
            v_norm = np.linalg.norm(v)
            if v_norm == 0.0:
                raise InvariantError(f"pool component {k} has zero norm")
            updated = eta * v + (1.0 - eta) * ((h_star @ v) / v_norm) * h_star
            if np.linalg.norm(updated) > 0.0:
                self.components[k] = updated
            v = self.components[k]
            h_star -= ((h_star @ v) / (v @ v)) * v
            self.ages[k] += 1

        rate = float(np.linalg.norm(h_star)) / h_norm
        appended = False
        if len(self.components) < self.k_max and rate > self.residual_delta:
            self.components.append(h_star.copy())
            self.ages.append(0)
            self.creation_task.append(self.current_task)
            appended = True
        return UpdateReport(
            residual_rate=rate,
            appended=appended,
            components_after=len(self.components),
            eta_used=first_eta,
        )

    def residual_rate(self, h) -> float:
        """Share of ``|h|`` left after read-only deflation through the pool."""
        vec = self._as_vector(h)
        h_norm = float(np.linalg.norm(vec))
        if h_norm == 0.0:
            raise ValidationError("residual rate of a zero vector is undefined")
        h_star = vec.copy()
        for k, v in enumerate(self.components):
            denom = v @ v
            if denom == 0.0:
                raise InvariantError(f"pool component {k} has zero norm")
            h_star -= ((h_star @ v) / denom) * v
        return float(np.linalg.norm(h_star)) / h_norm

    def adjust_tracking(self, observed_rate: float) -> float:
        """Set eps from an observed residual rate; returns the new eps."""
        rate = float(observed_rate)
        if not rate >= 0.0:
            raise ValidationError("observed rate must be >= 0")
        share = min(rate / self.residual_delta, 1.0) if self.residual_delta > 0 else 1.0
        self.tracking_eps = min(max(self.eps_cap * share, 0.0), self.eps_cap)
        return self.tracking_eps

    def raise_cap(self, increment: int) -> int:
        """Grow the component budget; returns the new cap."""
        if increment < 0:
            raise ValidationError("cap increment must be non-negative")
        self.k_max += int(increment)
        return self.k_max

    def freeze(self) -> None:
        self.frozen = True

    def unfreeze(self) -> None:
        self.frozen = False

    def clone(self) -> "ComponentPool":
        """Deep copy sharing no arrays with the live pool."""
        return ComponentPool(
            dim=self.dim,
            k_max=self.k_max,
            amnesic_l=self.amnesic_l,
            tracking_eps=self.tracking_eps,
            residual_delta=self.residual_delta,
            eps_cap=self.eps_cap,
            components=[v.copy() for v in self.components],
            ages=list(self.ages),
            creation_task=list(self.creation_task),
            current_task=self.current_task,
            frozen=self.frozen,
        )
