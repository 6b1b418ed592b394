"""Outer loops: projected Newton-Krylov (one-metric), projected gradient, and
the two-metric projected Newton-CG baseline.

All three share the same backtracking structure: from the current point x,
form a direction p, evaluate trial points as the projection of x - mu * p,
and halve mu until the Armijo condition f(x_t) < f(x) + alpha * g^T (x_t - x)
holds.  They differ in where p comes from and in which norm the projection is
taken: the one-metric method projects in the same low-rank metric that shaped
p, the baselines project in the Euclidean norm (componentwise clamp).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .active_set import (
    Partition,
    augmented_index,
    boundary_index,
    partitioned_direction,
    partitioned_project,
)
from .operators import HessianOperator, ObjectiveProblem
from .projection import IpmConfig

ACTIVE_SET_MODES = ("none", "boundary", "augmented")


class SolverStatus(str, Enum):
    CONVERGED_XTOL = "converged_xtol"
    CONVERGED_GTOL = "converged_gtol"
    MAX_ITERATIONS = "max_iterations"
    LINESEARCH_FAILURE = "linesearch_failure"


@dataclass(frozen=True)
class SolverConfig:
    """Shared configuration for the outer loops.

    epsilon is the active-set margin; None picks 1e-3 times the smallest
    finite bound range (with a 1e-8 floor).  warm_start reuses the
    interior-point state across line-search trials within one outer
    iteration; mu_reset restarts the line search from mu = 1 every iteration
    instead of carrying over the last accepted value.
    """

    max_outer: int = 20
    max_linesearch: int = 10
    alpha: float = 1e-4
    xtol: float = 1e-9
    gtol: float = 1e-8
    max_rank: int = 20
    shift: float = 1e-3
    active_set_mode: str = "none"
    epsilon: float | None = None
    warm_start: bool = True
    mu_reset: bool = False
    breakdown_tol: float = 1e-12
    ipm: IpmConfig = field(default_factory=IpmConfig)

    def __post_init__(self):
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if self.max_linesearch < 1:
            raise ValueError("max_linesearch must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not (self.xtol > 0 and self.gtol > 0):
            raise ValueError("xtol and gtol must be positive")
        if self.max_rank < 1:
            raise ValueError("max_rank must be at least 1")
        if not self.shift > 0:
            raise ValueError(f"shift must be positive, got {self.shift}")
        if self.active_set_mode not in ACTIVE_SET_MODES:
            raise ValueError(
                f"active_set_mode must be one of {ACTIVE_SET_MODES}, "
                f"got {self.active_set_mode!r}"
            )
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive when given")


@dataclass
class IterationRecord:
    """State after one accepted outer iteration.

    operator_applies and elapsed_seconds are cumulative since the start of
    the solve; an operator apply is any objective, gradient, or
    Hessian-vector evaluation.  descent_margin is the slack in the metric
    descent inequality g^T d <= -(1/mu) d^T M d + projection-error allowance
    (NaN for the two-metric baseline, where no single metric governs both the
    direction and the projection).
    """

    k: int
    f: float
    rel_f_reduction: float
    proj_grad_norm: float
    step_size: float
    ls_trials: int
    n_projections: int
    ipm_iters_total: int
    active_fraction: float
    operator_applies: int
    elapsed_seconds: float
    descent_margin: float = math.nan
    armijo_margin: float = math.nan

    @property
    def ipm_iters_avg(self) -> float:
        return self.ipm_iters_total / self.n_projections if self.n_projections else 0.0


@dataclass
class ConvergenceHistory:
    """Accepted-iteration records, in order; failed line searches add none."""

    records: list[IterationRecord] = field(default_factory=list)

    def append(self, record: IterationRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def final(self) -> IterationRecord | None:
        return self.records[-1] if self.records else None


@dataclass
class SolverResult:
    x_final: np.ndarray
    status: SolverStatus
    f: float
    proj_grad_norm: float
    history: ConvergenceHistory

    @property
    def iterations(self) -> int:
        return len(self.history)


class _CountedProblem:
    """Wraps a problem, counting objective/gradient/Hessian-vector evaluations."""

    def __init__(self, problem: ObjectiveProblem):
        self._p = problem
        self.applies = 0

    def value(self, x):
        self.applies += 1
        return float(self._p.value(x))

    def gradient(self, x):
        self.applies += 1
        return np.asarray(self._p.gradient(x), dtype=float)

    def hessian_at(self, x):
        op = self._p.hessian_at(x)

        def matvec(v):
            self.applies += 1
            return op.apply(v)

        return HessianOperator(op.n, matvec)


def projected_gradient_norm(
    problem: ObjectiveProblem, x: np.ndarray, grad: np.ndarray | None = None
) -> float:
    """|| x - clamp(x - grad f(x)) ||_2, zero exactly at stationary points."""
    x = np.asarray(x, dtype=float)
    g = problem.gradient(x) if grad is None else grad
    return float(np.linalg.norm(x - problem.bounds.clamp(x - g)))


def _auto_epsilon(bounds) -> float:
    ranges = bounds.finite_ranges()
    if ranges.size == 0:
        return 1e-8
    return max(1e-8, 1e-3 * float(ranges.min()))


def _build_partition(variant, mode, x, grad, bounds, epsilon) -> Partition:
    if variant == "pg" or mode == "none":
        return Partition.trivial(bounds.n, epsilon)
    if mode == "boundary":
        return boundary_index(x, bounds, epsilon)
    return augmented_index(x, grad, bounds, epsilon)


def _minimize(
    problem: ObjectiveProblem,
    config: SolverConfig,
    variant: str,
    x0: np.ndarray | None,
) -> SolverResult:
    t_start = time.perf_counter()
    bounds = problem.bounds
    if x0 is None:
        x0 = problem.x0
    if x0 is None:
        raise ValueError("no starting point: pass x0 or set problem.x0")
    x = np.asarray(x0, dtype=float).ravel().copy()
    if x.size != problem.n:
        raise ValueError("x0 dimension does not match the problem")
    if not bounds.contains(x):
        raise ValueError("starting point violates the bounds")

    counted = _CountedProblem(problem)
    epsilon = config.epsilon if config.epsilon is not None else _auto_epsilon(bounds)
    history = ConvergenceHistory()

    fx = counted.value(x)
    g = counted.gradient(x)
    pg = projected_gradient_norm(problem, x, grad=g)
    if pg < config.gtol:
        return SolverResult(x, SolverStatus.CONVERGED_GTOL, fx, pg, history)

    status = SolverStatus.MAX_ITERATIONS
    mu_next = 1.0
    mu_last_accepted = None

    for k in range(1, config.max_outer + 1):
        partition = _build_partition(
            variant, config.active_set_mode, x, g, bounds, epsilon
        )
        if variant == "pg":
            p, pmetric = g, None
        else:
            op = counted.hessian_at(x)
            p, pmetric = partitioned_direction(
                op,
                g,
                partition,
                min(config.max_rank, problem.n),
                config.shift,
                breakdown_tol=config.breakdown_tol,
            )

        mu = mu_next
        accepted = False
        warm = None
        n_proj = 0
        ipm_total = 0
        ls_trials = 0
        for _ in range(config.max_linesearch):
            ls_trials += 1
            y = x - mu * p
            if variant == "pnkhb":
                z, rep = partitioned_project(
                    pmetric, y, bounds, config.ipm, start=warm
                )
                ipm_total += rep.iterations
                if config.warm_start:
                    warm = rep.state
            else:
                z = bounds.clamp(y)
            n_proj += 1
            ft = counted.value(z)
            d = z - x
            gd = float(g @ d)
            if ft < fx + config.alpha * gd:
                accepted = True
                break
            mu /= 2.0

        if not accepted:
            status = SolverStatus.LINESEARCH_FAILURE
            break

        d_norm = float(np.linalg.norm(d))
        g_norm = float(np.linalg.norm(g))
        if variant == "pncg":
            descent_margin = math.nan
        else:
            quad = float(d @ d) if variant == "pg" else float(d @ pmetric.apply(d))
            slack = 100.0 * config.ipm.tol * (1.0 + d_norm) * g_norm
            descent_margin = (-quad / mu + slack) - gd
        armijo_margin = (fx + config.alpha * gd) - ft

        rel_step = d_norm / max(float(np.linalg.norm(x)), 1e-30)
        f_prev = fx
        x, fx = z, ft
        g = counted.gradient(x)
        pg = projected_gradient_norm(problem, x, grad=g)

        history.append(
            IterationRecord(
                k=k,
                f=fx,
                rel_f_reduction=(f_prev - fx) / max(abs(f_prev), 1e-30),
                proj_grad_norm=pg,
                step_size=mu,
                ls_trials=ls_trials,
                n_projections=n_proj,
                ipm_iters_total=ipm_total,
                active_fraction=partition.active_fraction,
                operator_applies=counted.applies,
                elapsed_seconds=time.perf_counter() - t_start,
                descent_margin=descent_margin,
                armijo_margin=armijo_margin,
            )
        )

        if config.mu_reset:
            mu_next = 1.0
        elif mu_last_accepted is not None and mu == mu_last_accepted:
            mu_next = min(1.5 * mu, 1.0)
        else:
            mu_next = mu
        mu_last_accepted = mu

        if rel_step < config.xtol:
            status = SolverStatus.CONVERGED_XTOL
            break
        if pg < config.gtol:
            status = SolverStatus.CONVERGED_GTOL
            break

    return SolverResult(x, status, fx, pg, history)


def solve_pnkhb(
    problem: ObjectiveProblem,
    x0: np.ndarray | None = None,
    config: SolverConfig = SolverConfig(),
) -> SolverResult:
    """Projected Newton-Krylov with the low-rank metric used for both the
    direction and the projection."""
    return _minimize(problem, config, "pnkhb", x0)


def solve_projected_gradient(
    problem: ObjectiveProblem,
    x0: np.ndarray | None = None,
    config: SolverConfig = SolverConfig(),
) -> SolverResult:
    """Projected gradient descent with Armijo backtracking."""
    return _minimize(problem, config, "pg", x0)


def solve_pncg_two_metric(
    problem: ObjectiveProblem,
    x0: np.ndarray | None = None,
    config: SolverConfig = SolverConfig(),
) -> SolverResult:
    """Newton-Krylov direction, but Euclidean (clamp) projection.

    With active_set_mode "none" this is the classical projected Newton-CG,
    which can stall when the clamp destroys the descent property of the
    Newton step; the boundary/augmented modes recover the usual two-metric
    projection scheme."""
    return _minimize(problem, config, "pncg", x0)
