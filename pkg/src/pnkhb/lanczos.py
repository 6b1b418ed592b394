"""Lanczos tridiagonalization and the low-rank metric built from it.

A symmetric operator H restricted to a Krylov subspace gives H ~ V T V^T with
V orthonormal (n x l) and T tridiagonal.  Two derived objects are used by the
solver: the pseudoinverse V T^{-1} V^T (Newton direction) and the shifted
metric V (T - c I) V^T + c I, which is positive definite on all of R^n and
agrees with V T V^T on the Krylov subspace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


@dataclass
class KrylovFactorization:
    """Orthonormal basis V and tridiagonal coefficients from a Lanczos run.

    alpha holds the l diagonal entries of T, beta the l-1 off-diagonal
    entries.  seed_norm is the Euclidean norm of the seed vector that started
    the recurrence (the first basis column is seed / seed_norm).
    """

    V: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    seed_norm: float

    def __post_init__(self):
        self.V = np.ascontiguousarray(np.asarray(self.V, dtype=float))
        self.alpha = np.asarray(self.alpha, dtype=float).ravel()
        self.beta = np.asarray(self.beta, dtype=float).ravel()
        if self.V.ndim != 2:
            raise ValueError("V must be a 2-d array")
        l = self.V.shape[1]
        if self.alpha.shape != (l,) or self.beta.shape != (max(l - 1, 0),):
            raise ValueError(
                f"inconsistent factorization sizes: V has {l} columns, "
                f"alpha {self.alpha.size}, beta {self.beta.size}"
            )
        if not self.seed_norm > 0:
            raise ValueError("seed_norm must be positive")

    @property
    def n(self) -> int:
        return self.V.shape[0]

    @property
    def rank(self) -> int:
        return self.V.shape[1]

    def t_matrix(self) -> np.ndarray:
        """The tridiagonal core T as a dense rank x rank array."""
        T = np.diag(self.alpha)
        if self.rank > 1:
            T += np.diag(self.beta, 1) + np.diag(self.beta, -1)
        return T

    def dense(self) -> np.ndarray:
        """Dense V T V^T; intended for small problems and tests."""
        return self.V @ self.t_matrix() @ self.V.T


@dataclass
class ShiftedMetric:
    """The positive definite metric V (T - shift*I) V^T + shift*I."""

    fact: KrylovFactorization
    shift: float

    def __post_init__(self):
        if not self.shift > 0:
            raise ValueError("shift must be positive")

    @property
    def n(self) -> int:
        return self.fact.n

    def dense(self) -> np.ndarray:
        n = self.n
        return (
            self.fact.V @ (self.fact.t_matrix() - self.shift * np.eye(self.fact.rank))
            @ self.fact.V.T + self.shift * np.eye(n)
        )


def tridiag_eigmin(alpha: np.ndarray, beta: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetric tridiagonal matrix (alpha, beta)."""
    alpha = np.asarray(alpha, dtype=float).ravel()
    beta = np.asarray(beta, dtype=float).ravel()
    if alpha.size == 1:
        return float(alpha[0])
    vals = scipy.linalg.eigvalsh_tridiagonal(
        alpha, beta, select="i", select_range=(0, 0)
    )
    return float(vals[0])


def _tridiag_matvec(alpha: np.ndarray, beta: np.ndarray, w: np.ndarray) -> np.ndarray:
    out = alpha * w
    if beta.size:
        out[:-1] += beta * w[1:]
        out[1:] += beta * w[:-1]
    return out


def lanczos_tridiag(
    op,
    seed: np.ndarray,
    max_rank: int,
    breakdown_tol: float = 1e-12,
    curvature_floor: float = 0.0,
) -> KrylovFactorization:
    """Run at most ``max_rank`` Lanczos steps on ``op`` starting from ``seed``.

    Uses full reorthogonalization (two classical Gram-Schmidt passes per
    step).  The recurrence stops early when the new off-diagonal entry falls
    below ``breakdown_tol`` relative to the magnitude of T's entries (the
    Krylov subspace is invariant), or when the smallest eigenvalue of the
    extended T would drop to ``curvature_floor`` or below, in which case the
    offending last step is discarded.

    Raises
    ------
    ValueError
        If the seed vector is zero or max_rank is out of range.
    numpy.linalg.LinAlgError
        If already the first diagonal entry fails the curvature floor, i.e.
        the operator has no usable positive curvature along the seed.
    """
    seed = np.asarray(seed, dtype=float).ravel()
    n = seed.size
    if not 1 <= max_rank <= n:
        raise ValueError(f"max_rank must be in [1, {n}], got {max_rank}")
    gamma = float(np.linalg.norm(seed))
    if gamma == 0.0:
        raise ValueError("Lanczos seed vector is zero")

    basis = [seed / gamma]
    alpha: list[float] = []
    beta: list[float] = []
    for j in range(1, max_rank + 1):
        vj = basis[-1]
        u = op.apply(vj)
        aj = float(vj @ u)
        emin = tridiag_eigmin(np.append(alpha, aj), np.asarray(beta))
        if emin <= curvature_floor:
            if j == 1:
                raise np.linalg.LinAlgError(
                    "no positive curvature along the seed direction "
                    f"(v^T H v = {aj:.3e} <= floor {curvature_floor:.3e})"
                )
            basis.pop()
            beta.pop()
            break
        alpha.append(aj)
        if j == max_rank:
            break
        r = u - aj * vj
        if j > 1:
            r -= beta[-1] * basis[-2]
        V = np.column_stack(basis)
        for _ in range(2):
            r -= V @ (V.T @ r)
        bj = float(np.linalg.norm(r))
        scale = max(np.abs(alpha).max(), max(beta, default=0.0))
        if bj <= breakdown_tol * scale:
            break
        beta.append(bj)
        basis.append(r / bj)

    return KrylovFactorization(
        V=np.column_stack(basis),
        alpha=np.asarray(alpha),
        beta=np.asarray(beta),
        seed_norm=gamma,
    )


def apply_pseudoinverse(fact: KrylovFactorization, v: np.ndarray) -> np.ndarray:
    """Apply V T^{-1} V^T to v, solving with T via LDL^T (LAPACK ptsv).

    Requires the tridiagonal core to be positive definite, which holds for
    factorizations produced with a nonnegative curvature floor.
    """
    v = np.asarray(v, dtype=float)
    w = fact.V.T @ v
    if fact.rank == 1:
        s = w / fact.alpha[0]
    else:
        ptsv, = scipy.linalg.get_lapack_funcs(("ptsv",), (fact.alpha, w))
        _, _, s, info = ptsv(fact.alpha.copy(), fact.beta.copy(), w)
        if info != 0:
            raise np.linalg.LinAlgError(
                f"tridiagonal core is not positive definite (ptsv info={info})"
            )
    return fact.V @ s


def apply_metric(metric: ShiftedMetric, v: np.ndarray) -> np.ndarray:
    """Apply the shifted metric V (T - c I) V^T + c I to v."""
    v = np.asarray(v, dtype=float)
    fact = metric.fact
    w = fact.V.T @ v
    t = _tridiag_matvec(fact.alpha, fact.beta, w) - metric.shift * w
    return fact.V @ t + metric.shift * v
