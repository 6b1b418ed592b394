"""Active-set estimation and the partitioned direction, metric, and projection.

Coordinates estimated active are updated by a scaled gradient step under the
metric nu * I; the remaining (inactive) block gets a Newton-type step from a
Lanczos factorization of the Hessian restricted to that block.  The combined
metric is block diagonal, so the projection decouples: a componentwise clamp
on the active block and an interior-point solve on the inactive block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lanczos import (
    KrylovFactorization,
    ShiftedMetric,
    apply_metric,
    apply_pseudoinverse,
    lanczos_tridiag,
)
from .operators import BoxBounds, HessianOperator
from .projection import IpmConfig, IpmReport, IpmState, project


@dataclass(frozen=True)
class Partition:
    """Disjoint active/inactive index sets covering range(n)."""

    active: np.ndarray
    inactive: np.ndarray
    epsilon: float

    def __post_init__(self):
        object.__setattr__(self, "active", np.asarray(self.active, dtype=int))
        object.__setattr__(self, "inactive", np.asarray(self.inactive, dtype=int))
        n = self.active.size + self.inactive.size
        joined = np.concatenate([self.active, self.inactive])
        if joined.size and (
            np.unique(joined).size != n or joined.min() < 0 or joined.max() >= n
        ):
            raise ValueError("active and inactive sets must partition range(n)")

    @property
    def n(self) -> int:
        return self.active.size + self.inactive.size

    @property
    def active_fraction(self) -> float:
        return self.active.size / self.n if self.n else 0.0

    @classmethod
    def trivial(cls, n: int, epsilon: float = 0.0) -> "Partition":
        """The empty-active partition; reduces everything to the plain method."""
        return cls(np.empty(0, dtype=int), np.arange(n), epsilon)


def boundary_index(x: np.ndarray, bounds: BoxBounds, epsilon: float) -> Partition:
    """Estimate as active all coordinates within epsilon of a finite bound."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    x = np.asarray(x, dtype=float)
    mask = (x <= bounds.lower + epsilon) | (x >= bounds.upper - epsilon)
    return Partition(np.flatnonzero(mask), np.flatnonzero(~mask), epsilon)


def augmented_index(
    x: np.ndarray, grad: np.ndarray, bounds: BoxBounds, epsilon: float
) -> Partition:
    """Boundary proximity refined by the gradient sign.

    A coordinate near a bound stays inactive unless the gradient pushes it
    outward, so curvature information is kept for constraints predicted to
    become inactive.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    x = np.asarray(x, dtype=float)
    grad = np.asarray(grad, dtype=float)
    mask = ((x <= bounds.lower + epsilon) & (grad > 0)) | (
        (x >= bounds.upper - epsilon) & (grad < 0)
    )
    return Partition(np.flatnonzero(mask), np.flatnonzero(~mask), epsilon)


@dataclass
class PartitionedMetric:
    """Block-diagonal metric: shifted low-rank on the inactive block, nu*I on
    the active block.

    ``fact`` is None when the inactive block is empty or the gradient
    vanishes there; the inactive metric then degenerates to shift * I.
    """

    partition: Partition
    fact: KrylovFactorization | None
    shift: float
    nu: float

    @property
    def inactive_metric(self) -> ShiftedMetric | None:
        if self.fact is None:
            return None
        return ShiftedMetric(self.fact, self.shift)

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = np.empty_like(v)
        act, inact = self.partition.active, self.partition.inactive
        out[act] = self.nu * v[act]
        if self.fact is not None:
            out[inact] = apply_metric(self.inactive_metric, v[inact])
        else:
            out[inact] = self.shift * v[inact]
        return out


def _restricted_operator(op: HessianOperator, idx: np.ndarray) -> HessianOperator:
    """The principal submatrix op[idx, idx] as a matrix-free operator."""

    def matvec(v):
        full = np.zeros(op.n)
        full[idx] = v
        return op.apply(full)[idx]

    return HessianOperator(idx.size, matvec)


def partitioned_direction(
    op: HessianOperator,
    grad: np.ndarray,
    partition: Partition,
    max_rank: int,
    shift: float,
    breakdown_tol: float = 1e-12,
) -> tuple[np.ndarray, PartitionedMetric]:
    """Search direction p (step is x - mu * p) and the matching metric.

    The inactive block of p is F^{-1} times the inactive gradient, where F is
    the Lanczos approximation of the Hessian's inactive submatrix seeded with
    that gradient; the active block is the gradient scaled by 1/nu with
    nu = ||g_active||_inf / ||F^{-1} g_inactive||_inf (1 in degenerate cases).
    """
    grad = np.asarray(grad, dtype=float)
    if grad.shape != (op.n,) or partition.n != op.n:
        raise ValueError("operator, gradient, and partition sizes must agree")
    act, inact = partition.active, partition.inactive

    fact = None
    p = np.zeros(op.n)
    if inact.size:
        g_in = grad[inact]
        if np.linalg.norm(g_in) > 0:
            sub = _restricted_operator(op, inact) if act.size else op
            fact = lanczos_tridiag(
                sub,
                g_in,
                min(max_rank, inact.size),
                breakdown_tol=breakdown_tol,
                curvature_floor=shift,
            )
            p[inact] = apply_pseudoinverse(fact, g_in)

    nu = 1.0
    if act.size and inact.size:
        num = float(np.abs(grad[act]).max())
        den = float(np.abs(p[inact]).max())
        if num > 0 and den > 0 and np.isfinite(num) and np.isfinite(den):
            nu = num / den
    if act.size:
        p[act] = grad[act] / nu

    return p, PartitionedMetric(partition, fact, shift, nu)


def partitioned_project(
    metric: PartitionedMetric,
    y: np.ndarray,
    bounds: BoxBounds,
    config: IpmConfig = IpmConfig(),
    start: IpmState | None = None,
) -> tuple[np.ndarray, IpmReport]:
    """Project y onto the box in the block-diagonal partitioned metric.

    Scaled-identity blocks project by clamping; the low-rank inactive block
    uses the interior-point solve.  The returned report describes the
    interior-point part (trivial when there is none).
    """
    y = np.asarray(y, dtype=float).ravel()
    act, inact = metric.partition.active, metric.partition.inactive
    if y.size != metric.partition.n or bounds.n != y.size:
        raise ValueError("metric, y, and bounds dimensions must agree")

    z = np.empty_like(y)
    z[act] = np.clip(y[act], bounds.lower[act], bounds.upper[act])
    if metric.fact is not None:
        sub_bounds = BoxBounds(bounds.lower[inact], bounds.upper[inact])
        z_in, report = project(
            metric.inactive_metric, y[inact], sub_bounds, config, start=start
        )
        z[inact] = z_in
    else:
        z[inact] = np.clip(y[inact], bounds.lower[inact], bounds.upper[inact])
        report = IpmReport(
            iterations=0,
            converged=True,
            dual_residual=0.0,
            primal_residual=0.0,
            complementarity=0.0,
        )
    return z, report
