"""Projected Newton-Krylov solver for bound-constrained minimization.

The search direction and the projection metric both come from a low-rank
Lanczos approximation of the Hessian; the metric projection onto the box is
solved by a primal-dual interior-point method whose Newton systems cost
O(n l^2) via the Woodbury identity.
"""

from .active_set import (
    Partition,
    PartitionedMetric,
    augmented_index,
    boundary_index,
    partitioned_direction,
    partitioned_project,
)
from .lanczos import (
    KrylovFactorization,
    ShiftedMetric,
    apply_metric,
    apply_pseudoinverse,
    lanczos_tridiag,
    tridiag_eigmin,
)
from .operators import (
    BoxBounds,
    HessianOperator,
    ObjectiveProblem,
    check_gradient,
    dense_operator,
    gauss_newton_operator,
)
from .problems import (
    MlrProblem,
    QuadraticBoxProblem,
    SpectralCtProblem,
    make_fig1_problem,
    make_synthetic_mlr,
    make_toy_ct,
)
from .projection import (
    BoundRows,
    IpmConfig,
    IpmReport,
    IpmState,
    fraction_to_boundary,
    ipm_step,
    project,
    woodbury_solve,
)
from .solver import (
    ConvergenceHistory,
    IterationRecord,
    SolverConfig,
    SolverResult,
    SolverStatus,
    projected_gradient_norm,
    solve_pncg_two_metric,
    solve_pnkhb,
    solve_projected_gradient,
)

__all__ = [
    "BoundRows",
    "BoxBounds",
    "ConvergenceHistory",
    "HessianOperator",
    "IpmConfig",
    "IpmReport",
    "IpmState",
    "IterationRecord",
    "KrylovFactorization",
    "MlrProblem",
    "ObjectiveProblem",
    "Partition",
    "PartitionedMetric",
    "QuadraticBoxProblem",
    "ShiftedMetric",
    "SolverConfig",
    "SolverResult",
    "SolverStatus",
    "SpectralCtProblem",
    "apply_metric",
    "apply_pseudoinverse",
    "augmented_index",
    "boundary_index",
    "check_gradient",
    "dense_operator",
    "fraction_to_boundary",
    "gauss_newton_operator",
    "ipm_step",
    "lanczos_tridiag",
    "make_fig1_problem",
    "make_synthetic_mlr",
    "make_toy_ct",
    "partitioned_direction",
    "partitioned_project",
    "project",
    "projected_gradient_norm",
    "solve_pncg_two_metric",
    "solve_pnkhb",
    "solve_projected_gradient",
    "tridiag_eigmin",
    "woodbury_solve",
]

__version__ = "0.1.0"
