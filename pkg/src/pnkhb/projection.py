"""Projection onto a box in the norm induced by a low-rank-plus-identity metric.

The projection min_z 1/2 ||z - y||_M^2 s.t. l <= z <= u, with
M = V (T - c I) V^T + c I, is solved by a primal-dual interior-point method.
Only finite bounds contribute inequality rows.  Each Newton step reduces to a
solve with M + diag(e), which the Woodbury identity brings down to O(n l^2)
per iteration; no products with the underlying Hessian are needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .lanczos import ShiftedMetric, _tridiag_matvec
from .operators import BoxBounds


@dataclass(frozen=True)
class IpmConfig:
    """Parameters of the interior-point projection solver.

    sigma is the centering parameter, tau the fraction-to-boundary factor.
    Convergence requires the primal and dual residual norms and the largest
    complementarity product w_i * lambda_i to fall below tol.
    """

    sigma: float = 0.1
    tau: float = 0.995
    tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if not self.tol > 0.0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 0:
            raise ValueError(f"max_iter must be nonnegative, got {self.max_iter}")


@dataclass
class IpmState:
    """Primal iterate z, slacks w, and multipliers lambda (w, lam > 0)."""

    z: np.ndarray
    w: np.ndarray
    lam: np.ndarray

    @property
    def duality_measure(self) -> float:
        """Average complementarity product w^T lam / m (0 if unconstrained)."""
        m = self.w.size
        return float(self.w @ self.lam / m) if m else 0.0


@dataclass
class IpmReport:
    """Outcome of a projection solve."""

    iterations: int
    converged: bool
    dual_residual: float
    primal_residual: float
    complementarity: float
    state: IpmState | None = field(default=None, repr=False)


@dataclass
class IpmStepInfo:
    """Diagnostics of a single interior-point step."""

    beta: float
    dual_residual: float
    primal_residual: float
    complementarity: float


@dataclass(frozen=True)
class BoundRows:
    """Index form of the constraint rows K z >= b for the finite bounds.

    Lower bounds contribute rows +e_i (b = l_i), finite upper bounds rows
    -e_i (b = -u_i).  Slack ordering is all lower rows first, then all upper
    rows.
    """

    n: int
    lower_idx: np.ndarray
    upper_idx: np.ndarray
    lower_val: np.ndarray
    upper_val: np.ndarray

    @classmethod
    def from_bounds(cls, bounds: BoxBounds) -> "BoundRows":
        lo = np.flatnonzero(np.isfinite(bounds.lower))
        up = np.flatnonzero(np.isfinite(bounds.upper))
        return cls(
            n=bounds.n,
            lower_idx=lo,
            upper_idx=up,
            lower_val=bounds.lower[lo],
            upper_val=bounds.upper[up],
        )

    @property
    def m(self) -> int:
        return self.lower_idx.size + self.upper_idx.size

    @property
    def b(self) -> np.ndarray:
        return np.concatenate([self.lower_val, -self.upper_val])

    def apply(self, z: np.ndarray) -> np.ndarray:
        """K z."""
        return np.concatenate([z[self.lower_idx], -z[self.upper_idx]])

    def apply_t(self, t: np.ndarray) -> np.ndarray:
        """K^T t."""
        out = np.zeros(self.n)
        nl = self.lower_idx.size
        out[self.lower_idx] += t[:nl]
        out[self.upper_idx] -= t[nl:]
        return out

    def diag_ktk(self, d: np.ndarray) -> np.ndarray:
        """Diagonal of K^T diag(d) K as a length-n vector."""
        out = np.zeros(self.n)
        nl = self.lower_idx.size
        out[self.lower_idx] += d[:nl]
        out[self.upper_idx] += d[nl:]
        return out


class _LowRank:
    """U C U^T + c I with tridiagonal core C = T - c I, plus diagonal solves.

    U need not be orthonormal (it may be a row subset of a Lanczos basis).
    """

    def __init__(self, U: np.ndarray, td: np.ndarray, te: np.ndarray, c: float):
        self.U = np.ascontiguousarray(U)
        self.td = td  # diagonal of C
        self.te = te  # off-diagonal of C
        self.c = c
        self.rank = U.shape[1]
        # C with all entries ~0 means the metric is exactly c*I.
        scale = max(np.abs(td).max(initial=0.0), np.abs(te).max(initial=0.0))
        self._core_zero = scale <= 1e-14 * max(c, 1.0)
        self._core = None
        if not self._core_zero:
            C = np.diag(td)
            if te.size:
                C += np.diag(te, 1) + np.diag(te, -1)
            self._core = C

    @classmethod
    def from_metric(cls, metric: ShiftedMetric, rows: np.ndarray | None = None):
        fact = metric.fact
        U = fact.V if rows is None else fact.V[rows]
        return cls(U, fact.alpha - metric.shift, fact.beta, metric.shift)

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = self.c * v
        if not self._core_zero:
            w = self.U.T @ v
            out += self.U @ _tridiag_matvec(self.td, self.te, w)
        return out

    def solve_plus_diag(self, e: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        """Solve (U C U^T + diag(c + e)) x = rhs with e >= 0 elementwise.

        Uses the Woodbury form that never inverts C, so an exactly or nearly
        singular core (including C = 0) is handled without special cases.
        """
        d_inv = 1.0 / (self.c + e)
        x = d_inv * rhs
        if self._core_zero:
            return x
        P = self.U * d_inv[:, None]
        G = self.U.T @ P
        S = np.eye(self.rank) + self._core @ G
        try:
            corr = scipy.linalg.solve(S, self._core @ (self.U.T @ x))
        except scipy.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                f"singular {self.rank}x{self.rank} Woodbury system"
            ) from exc
        return x - P @ corr


def woodbury_solve(metric: ShiftedMetric, e: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve (M + diag(e)) x = rhs for the shifted metric M, e >= 0.

    Costs O(n l^2) and never forms an n x n matrix.
    """
    e = np.asarray(e, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if e.shape != rhs.shape or e.shape != (metric.n,):
        raise ValueError("e and rhs must be vectors of the metric dimension")
    if np.any(e < 0):
        raise ValueError("diagonal perturbation e must be nonnegative")
    return _LowRank.from_metric(metric).solve_plus_diag(e, rhs)


def fraction_to_boundary(q: np.ndarray, dq: np.ndarray, tau: float) -> float:
    """Largest step beta <= 1 keeping q + beta*dq >= (1 - tau) * q > 0."""
    neg = dq < 0
    if not neg.any():
        return 1.0
    return float(min(1.0, tau * np.min(-q[neg] / dq[neg])))


def _residuals(lowrank, rows, z, w, lam, lin):
    r = lowrank.apply(z) + lin - rows.apply_t(lam)
    v = rows.apply(z) - rows.b - w
    comp = float(np.max(w * lam, initial=0.0))
    return r, v, comp


def _newton_step(lowrank, rows, z, w, lam, r, v, sigma, tau):
    m = w.size
    xi = float(w @ lam / m) if m else 0.0
    p = (lam * (-v - w) + sigma * xi) / w
    e = rows.diag_ktk(lam / w)
    dz = lowrank.solve_plus_diag(e, -r + rows.apply_t(p))
    kdz = rows.apply(dz)
    dlam = p - (lam / w) * kdz
    dw = kdz + v
    beta = min(
        fraction_to_boundary(w, dw, tau), fraction_to_boundary(lam, dlam, tau)
    )
    return dz, dw, dlam, beta


def ipm_step(
    metric: ShiftedMetric,
    state: IpmState,
    y: np.ndarray,
    rows: BoundRows,
    config: IpmConfig = IpmConfig(),
) -> tuple[IpmState, IpmStepInfo]:
    """Take one primal-dual step for min 1/2||z - y||_M^2 s.t. K z >= b.

    Returns the updated state and the residual norms at the *input* state.
    """
    if np.any(state.w <= 0) or np.any(state.lam <= 0):
        raise ValueError("slacks and multipliers must be strictly positive")
    lowrank = _LowRank.from_metric(metric)
    lin = -lowrank.apply(np.asarray(y, dtype=float))
    z, w, lam = state.z.copy(), state.w.copy(), state.lam.copy()
    r, v, comp = _residuals(lowrank, rows, z, w, lam, lin)
    dz, dw, dlam, beta = _newton_step(
        lowrank, rows, z, w, lam, r, v, config.sigma, config.tau
    )
    new = IpmState(z + beta * dz, w + beta * dw, lam + beta * dlam)
    info = IpmStepInfo(
        beta=beta,
        dual_residual=float(np.linalg.norm(r)),
        primal_residual=float(np.linalg.norm(v)),
        complementarity=comp,
    )
    return new, info


def _interior_start(lower, upper, y):
    """Strictly interior primal start: y clamped 1% of the range off each bound."""
    rng = np.where(
        np.isfinite(lower) & np.isfinite(upper),
        np.minimum(1.0, upper - lower),
        1.0,
    )
    delta = 0.01 * rng
    lo = np.where(np.isfinite(lower), lower + delta, -np.inf)
    hi = np.where(np.isfinite(upper), upper - delta, np.inf)
    return np.clip(y, lo, hi)


def project(
    metric: ShiftedMetric,
    y: np.ndarray,
    bounds: BoxBounds,
    config: IpmConfig = IpmConfig(),
    start: IpmState | None = None,
) -> tuple[np.ndarray, IpmReport]:
    """Project y onto the box in the metric norm: argmin_z 1/2 ||z - y||_M^2.

    Coordinates with l_i == u_i are eliminated up front.  The reported
    residuals are those of the returned iterate, so ``converged`` means the
    point itself satisfies the tolerance.  ``start`` warm-starts the solve
    from the state of a previous report on the same metric and bounds.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size != metric.n or bounds.n != metric.n:
        raise ValueError("metric, y, and bounds dimensions must agree")

    lower, upper = bounds.lower, bounds.upper
    fixed = np.isfinite(lower) & (lower == upper)
    free = ~fixed
    fact = metric.fact
    c = metric.shift
    td, te = fact.alpha - c, fact.beta

    if fixed.any():
        z_fixed = lower[fixed]
        lowrank = _LowRank(fact.V[free], td, te, c)
        # Reduced linear term -(M y)_F + M_FX z_X; the identity part of M is
        # diagonal, so only the low-rank part couples free and fixed blocks.
        lin = -lowrank.apply(y[free])
        coupling = fact.V[fixed].T @ (z_fixed - y[fixed])
        lin += lowrank.U @ _tridiag_matvec(td, te, coupling)
        red_bounds = BoxBounds(lower[free], upper[free])
        y_red = y[free]
    else:
        lowrank = _LowRank(fact.V, td, te, c)
        lin = -lowrank.apply(y)
        red_bounds = bounds
        y_red = y

    rows = BoundRows.from_bounds(red_bounds)
    n_free = red_bounds.n

    if start is not None and start.z.size == n_free and start.w.size == rows.m:
        ok = not (np.any(start.w <= 0) or np.any(start.lam <= 0))
        if ok:
            z, w, lam = start.z.copy(), start.w.copy(), start.lam.copy()
        else:
            start = None
    elif start is not None:
        raise ValueError("warm-start state does not match the reduced problem size")
    if start is None:
        z = _interior_start(red_bounds.lower, red_bounds.upper, y_red)
        w = rows.apply(z) - rows.b
        lam = np.ones(rows.m)

    iterations = 0
    converged = False
    r, v, comp = _residuals(lowrank, rows, z, w, lam, lin)
    while True:
        r_norm = float(np.linalg.norm(r))
        v_norm = float(np.linalg.norm(v))
        if r_norm < config.tol and v_norm < config.tol and comp < config.tol:
            converged = True
            break
        if iterations >= config.max_iter:
            break
        dz, dw, dlam, beta = _newton_step(
            lowrank, rows, z, w, lam, r, v, config.sigma, config.tau
        )
        z += beta * dz
        w += beta * dw
        lam += beta * dlam
        iterations += 1
        r, v, comp = _residuals(lowrank, rows, z, w, lam, lin)

    if fixed.any():
        out = np.empty(metric.n)
        out[free] = z
        out[fixed] = lower[fixed]
    else:
        out = z.copy()
    out = np.clip(out, lower, upper)

    report = IpmReport(
        iterations=iterations,
        converged=converged,
        dual_residual=r_norm,
        primal_residual=v_norm,
        complementarity=comp,
        state=IpmState(z, w, lam),
    )
    return out, report
