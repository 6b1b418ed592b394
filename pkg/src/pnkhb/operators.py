"""Matrix-free operators, box bounds, and objective-problem containers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class HessianOperator:
    """Symmetric positive semidefinite operator given only by matrix-vector products.

    Parameters
    ----------
    n : int
        Dimension of the space the operator acts on.
    matvec : callable
        Maps a vector of shape (n,) to the product with the operator.
    """

    def __init__(self, n: int, matvec: Callable[[np.ndarray], np.ndarray]):
        if n <= 0:
            raise ValueError(f"operator dimension must be positive, got {n}")
        self.n = int(n)
        self._matvec = matvec

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise ValueError(f"expected vector of shape ({self.n},), got {v.shape}")
        out = np.asarray(self._matvec(v), dtype=float)
        if out.shape != (self.n,):
            raise ValueError(
                f"operator returned shape {out.shape}, expected ({self.n},)"
            )
        return out

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return self.apply(v)


@dataclass(frozen=True)
class BoxBounds:
    """Elementwise bounds l <= x <= u; entries may be -inf/+inf."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).ravel()
        upper = np.asarray(self.upper, dtype=float).ravel()
        if lower.shape != upper.shape:
            raise ValueError("lower and upper bounds must have the same shape")
        if np.isnan(lower).any() or np.isnan(upper).any():
            raise ValueError("bounds must not contain NaN")
        if np.any(lower > upper):
            i = int(np.argmax(lower > upper))
            raise ValueError(
                f"lower bound exceeds upper bound at index {i}: "
                f"{lower[i]} > {upper[i]}"
            )
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n(self) -> int:
        return self.lower.size

    def clamp(self, x: np.ndarray) -> np.ndarray:
        """Project x onto the box in the Euclidean norm (componentwise clip)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"expected vector of shape ({self.n},), got {x.shape}")
        return np.clip(x, self.lower, self.upper)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol)
        )

    def finite_ranges(self) -> np.ndarray:
        """u - l restricted to coordinates where both bounds are finite."""
        both = np.isfinite(self.lower) & np.isfinite(self.upper)
        return (self.upper - self.lower)[both]


@dataclass
class ObjectiveProblem:
    """Smooth objective over a box: value, gradient, and Hessian access at a point.

    ``hessian_at(x)`` returns a :class:`HessianOperator` for the (possibly
    approximate, e.g. Gauss-Newton) Hessian at x.  The operator only needs to
    be symmetric positive semidefinite.
    """

    n: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian_at: Callable[[np.ndarray], HessianOperator]
    bounds: BoxBounds
    name: str = ""
    x0: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.bounds.n != self.n:
            raise ValueError(
                f"bounds dimension {self.bounds.n} does not match problem "
                f"dimension {self.n}"
            )
        if self.x0 is not None:
            x0 = np.asarray(self.x0, dtype=float).ravel()
            if x0.size != self.n:
                raise ValueError("x0 dimension does not match problem dimension")
            self.x0 = x0


def dense_operator(A: np.ndarray, sym_tol: float = 1e-12) -> HessianOperator:
    """Wrap a dense symmetric matrix as a HessianOperator.

    Raises if A is not square or deviates from symmetry by more than
    ``sym_tol`` relative to its norm.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    scale = np.abs(A).max()
    if scale > 0 and np.abs(A - A.T).max() > sym_tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    return HessianOperator(A.shape[0], lambda v: A @ v)


def gauss_newton_operator(
    n: int,
    jvp: Callable[[np.ndarray], np.ndarray],
    jtvp: Callable[[np.ndarray], np.ndarray],
    extra: Callable[[np.ndarray], np.ndarray] | None = None,
) -> HessianOperator:
    """Gauss-Newton operator v -> J^T(Jv) (+ optional extra SPSD term).

    ``jvp``/``jtvp`` apply the Jacobian and its transpose; ``extra`` adds a
    regularization operator (e.g. a scaled discrete Laplacian).
    """

    def matvec(v):
        out = jtvp(np.asarray(jvp(v), dtype=float))
        if extra is not None:
            out = out + extra(v)
        return out

    return HessianOperator(n, matvec)


def check_gradient(
    problem: ObjectiveProblem,
    x: np.ndarray,
    n_directions: int = 10,
    seed: int = 0,
) -> float:
    """Compare the analytic gradient with central differences.

    Probes ``n_directions`` random unit directions and, for each, takes the
    best agreement over step sizes h in {1e-4, 1e-5, 1e-6}.  Returns the
    maximum relative error over directions.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(problem.gradient(x), dtype=float)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_directions):
        d = rng.standard_normal(x.size)
        d /= np.linalg.norm(d)
        analytic = float(g @ d)
        best = np.inf
        for h in (1e-4, 1e-5, 1e-6):
            fd = (problem.value(x + h * d) - problem.value(x - h * d)) / (2 * h)
            err = abs(fd - analytic) / (abs(analytic) + 1e-12)
            best = min(best, err)
        worst = max(worst, best)
    return worst
