"""Desk-scale benchmark problems.

Three families: a 2-d box quadratic whose Newton step exposes the difference
between Euclidean and Hessian-metric projection, synthetic multinomial
logistic regression on random tanh features, and a toy energy-windowed
spectral CT reconstruction with a Kronecker-structured forward model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import (
    BoxBounds,
    HessianOperator,
    ObjectiveProblem,
    dense_operator,
    gauss_newton_operator,
)


# ---------------------------------------------------------------------------
# box quadratic


@dataclass
class QuadraticBoxProblem:
    """f(x) = 1/2 x^T H x + b^T x over a box, with constant SPD Hessian H."""

    H: np.ndarray
    b: np.ndarray
    bounds: BoxBounds
    x0: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.b = np.asarray(self.b, dtype=float).ravel()
        self._op = dense_operator(self.H)  # validates squareness and symmetry
        if self.b.size != self.H.shape[0] or self.bounds.n != self.b.size:
            raise ValueError("H, b, and bounds dimensions must agree")

    @property
    def n(self) -> int:
        return self.b.size

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ (self.H @ x) + self.b @ x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.H @ np.asarray(x, dtype=float) + self.b

    def objective(self) -> ObjectiveProblem:
        return ObjectiveProblem(
            n=self.n,
            value=self.value,
            gradient=self.gradient,
            hessian_at=lambda x: self._op,
            bounds=self.bounds,
            name="quadratic",
            x0=self.x0,
        )


def make_fig1_problem() -> QuadraticBoxProblem:
    """The 2-d demonstration quadratic.

    H = [[1, 1], [1, 2]], b = [1, 1], box [-5, 0] x [3, 8], start [-3, 7].
    The unconstrained minimizer [-1, 0] is infeasible; projecting it onto the
    box in the Euclidean norm gives the suboptimal corner [-1, 3], while the
    projection in the H-norm gives the true constrained optimum [-4, 3].
    """
    return QuadraticBoxProblem(
        H=np.array([[1.0, 1.0], [1.0, 2.0]]),
        b=np.array([1.0, 1.0]),
        bounds=BoxBounds(np.array([-5.0, 3.0]), np.array([0.0, 8.0])),
        x0=np.array([-3.0, 7.0]),
    )


# ---------------------------------------------------------------------------
# multinomial logistic regression on random tanh features


@dataclass
class MlrProblem:
    """Mean cross-entropy of a linear classifier over fixed random features.

    The weight matrix X is (n_classes x m_f), flattened row-major into the
    optimization vector.  Hypothesis columns are softmax(X d_j) for feature
    columns d_j; the objective is the average cross-entropy against one-hot
    labels.  The exact Hessian is used (the model is linear in X, so the
    objective is convex).
    """

    expansion: np.ndarray  # K, (m_f x n_f)
    features: np.ndarray  # D, (m_f x N), columns tanh(K b_j)
    labels: np.ndarray  # C, (n_classes x N), one-hot columns
    bounds: BoxBounds
    x0: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        if self.features.shape[1] != self.labels.shape[1]:
            raise ValueError("features and labels must have the same sample count")
        if self.bounds.n != self.n:
            raise ValueError("bounds dimension must be n_classes * m_f")

    @property
    def n_classes(self) -> int:
        return self.labels.shape[0]

    @property
    def m_f(self) -> int:
        return self.features.shape[0]

    @property
    def n_samples(self) -> int:
        return self.features.shape[1]

    @property
    def n(self) -> int:
        return self.n_classes * self.m_f

    def _weights(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float).reshape(self.n_classes, self.m_f)

    def hypothesis(self, x: np.ndarray) -> np.ndarray:
        """Softmax probabilities, (n_classes x N); columns sum to one."""
        scores = self._weights(x) @ self.features
        scores -= scores.max(axis=0, keepdims=True)
        p = np.exp(scores)
        p /= p.sum(axis=0, keepdims=True)
        return p

    def value(self, x: np.ndarray) -> float:
        scores = self._weights(x) @ self.features
        scores -= scores.max(axis=0, keepdims=True)
        log_norm = np.log(np.exp(scores).sum(axis=0))
        return float(-np.sum(self.labels * (scores - log_norm)) / self.n_samples)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        p = self.hypothesis(x)
        return ((p - self.labels) @ self.features.T / self.n_samples).ravel()

    def hessian_at(self, x: np.ndarray) -> HessianOperator:
        p = self.hypothesis(x)

        def matvec(v):
            u = v.reshape(self.n_classes, self.m_f) @ self.features
            pu = p * u
            pu -= p * pu.sum(axis=0, keepdims=True)
            return (pu @ self.features.T / self.n_samples).ravel()

        return HessianOperator(self.n, matvec)

    def objective(self) -> ObjectiveProblem:
        return ObjectiveProblem(
            n=self.n,
            value=self.value,
            gradient=self.gradient,
            hessian_at=self.hessian_at,
            bounds=self.bounds,
            name="mlr",
            x0=self.x0,
        )


def make_synthetic_mlr(
    n_classes: int = 5,
    n_f: int = 20,
    m_f: int = 100,
    N: int = 2000,
    seed: int = 0,
    bound_magnitude: float = 0.05,
) -> MlrProblem:
    """Class-dependent Gaussian blobs pushed through a random tanh expansion.

    Inputs b_j are drawn around one of n_classes Gaussian means, features are
    d_j = tanh(K b_j) with a fixed standard-normal K (m_f > n_f), and the
    weights are box-constrained to [-bound_magnitude, bound_magnitude].

    The blob coordinates live on a geometric range of scales (two decades)
    with class separation proportional to each coordinate's scale, so the
    curvature of the resulting objective is spread over several orders of
    magnitude -- the regime where a rescaling Newton metric pays off over
    plain gradient steps.
    """
    if m_f <= n_f:
        raise ValueError(f"feature expansion requires m_f > n_f, got {m_f} <= {n_f}")
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    if N < n_classes:
        raise ValueError("need at least one sample per class")
    if not bound_magnitude > 0:
        raise ValueError("bound_magnitude must be positive")

    rng = np.random.default_rng(seed)
    scales = np.logspace(-0.1, -2.0, n_f)[:, None]
    means = 5.0 * scales * rng.standard_normal((n_f, n_classes))
    classes = rng.integers(n_classes, size=N)
    inputs = means[:, classes] + scales * rng.standard_normal((n_f, N))
    expansion = rng.standard_normal((m_f, n_f))
    features = np.tanh(expansion @ inputs)
    labels = np.zeros((n_classes, N))
    labels[classes, np.arange(N)] = 1.0

    n = n_classes * m_f
    bounds = BoxBounds(
        np.full(n, -bound_magnitude), np.full(n, bound_magnitude)
    )
    return MlrProblem(
        expansion=expansion,
        features=features,
        labels=labels,
        bounds=bounds,
        x0=np.zeros(n),
    )


# ---------------------------------------------------------------------------
# toy energy-windowed spectral CT


@dataclass
class SpectralCtProblem:
    """Nonlinear least squares for material decomposition from windowed counts.

    Forward model: y_model(w) = (S^T kron I) exp(-(C kron A) w), evaluated
    via the identity (M kron N) vec(W) = vec(N W M^T) so no Kronecker product
    is ever materialized.  The unknown w stacks one weight image per material
    (column-major over a (N_v x N_m) matrix, material 1 first).  Objective:

        1/2 ||y_model(w) - y||^2 + gamma1/2 ||D w_1||^2 + gamma2 * sum(w_2)

    with D a discrete gradient on the material-1 image; the linear gamma2
    term promotes sparsity of material 2 and is smooth because w >= 0 is
    enforced by the bounds.  The Hessian is the Gauss-Newton operator
    J^T J + gamma1 D^T D.
    """

    spectra: np.ndarray  # S, (N_e x N_b)
    attenuation: np.ndarray  # C, (N_e x N_m)
    rays: np.ndarray  # A, (N_d*N_p x N_v)
    grad_op: np.ndarray  # D, acting on the first N_v entries
    y: np.ndarray
    gamma1: float
    gamma2: float
    bounds: BoxBounds
    x0: np.ndarray | None = None
    w_true: np.ndarray | None = field(default=None, repr=False)
    _dtd: np.ndarray = field(init=False, repr=False)

    MAX_EXPONENT = 500.0

    def __post_init__(self):
        self.spectra = np.asarray(self.spectra, dtype=float)
        self.attenuation = np.asarray(self.attenuation, dtype=float)
        self.rays = np.asarray(self.rays, dtype=float)
        self.grad_op = np.asarray(self.grad_op, dtype=float)
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.attenuation.shape[0] != self.spectra.shape[0]:
            raise ValueError("spectra and attenuation must share the energy axis")
        if self.n_materials < 2:
            raise ValueError("need at least 2 materials")
        if self.grad_op.shape[1] != self.n_voxels:
            raise ValueError("grad_op must act on one material image")
        if self.y.size != self.rays.shape[0] * self.n_windows:
            raise ValueError("data size must be n_rays * n_windows")
        if self.bounds.n != self.n:
            raise ValueError("bounds dimension must be N_v * N_m")
        self._dtd = self.grad_op.T @ self.grad_op

    @property
    def n_voxels(self) -> int:
        return self.rays.shape[1]

    @property
    def n_materials(self) -> int:
        return self.attenuation.shape[1]

    @property
    def n_windows(self) -> int:
        return self.spectra.shape[1]

    @property
    def n(self) -> int:
        return self.n_voxels * self.n_materials

    def _exponents(self, w: np.ndarray) -> np.ndarray:
        """(C kron A) w as an (n_rays x N_e) array."""
        W = np.asarray(w, dtype=float).reshape(
            (self.n_voxels, self.n_materials), order="F"
        )
        B = self.rays @ W @ self.attenuation.T
        if np.abs(B).max() > self.MAX_EXPONENT:
            raise ValueError(
                "forward-model exponent exceeds magnitude "
                f"{self.MAX_EXPONENT:g}; the problem is badly scaled"
            )
        return B

    def forward(self, w: np.ndarray) -> np.ndarray:
        """Model counts y_model(w), length n_rays * N_b."""
        E = np.exp(-self._exponents(w))
        return (E @ self.spectra).ravel(order="F")

    def _jacobian_pieces(self, w: np.ndarray):
        E = np.exp(-self._exponents(w))

        def jvp(v):
            V = v.reshape((self.n_voxels, self.n_materials), order="F")
            t = E * (self.rays @ V @ self.attenuation.T)
            return -(t @ self.spectra).ravel(order="F")

        def jtvp(u):
            U = u.reshape((self.rays.shape[0], self.n_windows), order="F")
            t = E * (U @ self.spectra.T)
            return -(self.rays.T @ t @ self.attenuation).ravel(order="F")

        return E, jvp, jtvp

    def value(self, w: np.ndarray) -> float:
        res = self.forward(w) - self.y
        w1 = w[: self.n_voxels]
        w2 = w[self.n_voxels : 2 * self.n_voxels]
        return float(
            0.5 * res @ res
            + 0.5 * self.gamma1 * np.sum((self.grad_op @ w1) ** 2)
            + self.gamma2 * np.sum(w2)
        )

    def gradient(self, w: np.ndarray) -> np.ndarray:
        _, jvp, jtvp = self._jacobian_pieces(w)
        g = jtvp(self.forward(w) - self.y)
        g[: self.n_voxels] += self.gamma1 * (self._dtd @ w[: self.n_voxels])
        g[self.n_voxels : 2 * self.n_voxels] += self.gamma2
        return g

    def hessian_at(self, w: np.ndarray) -> HessianOperator:
        _, jvp, jtvp = self._jacobian_pieces(w)

        def regularizer(v):
            out = np.zeros(self.n)
            out[: self.n_voxels] = self.gamma1 * (self._dtd @ v[: self.n_voxels])
            return out

        return gauss_newton_operator(self.n, jvp, jtvp, extra=regularizer)

    def objective(self) -> ObjectiveProblem:
        return ObjectiveProblem(
            n=self.n,
            value=self.value,
            gradient=self.gradient,
            hessian_at=self.hessian_at,
            bounds=self.bounds,
            name="ct",
            x0=self.x0,
        )


def _parallel_beam_rays(side: int, n_angles: int) -> np.ndarray:
    """Sampled line-length matrix for parallel beams over the unit square.

    One detector per image row/column (N_d = side); rays are marched with a
    quarter-pixel step and each sample inside the square adds the step length
    to its pixel, approximating the intersection length.
    """
    step = 1.0 / (4 * side)
    ts = np.arange(-0.75, 0.75, step)
    offsets = (np.arange(side) + 0.5) / side - 0.5
    A = np.zeros((side * n_angles, side * side))
    for a in range(n_angles):
        theta = np.pi * a / n_angles
        d = np.array([np.cos(theta), np.sin(theta)])
        perp = np.array([-d[1], d[0]])
        for i, off in enumerate(offsets):
            pts = 0.5 + off * perp[None, :] + ts[:, None] * d[None, :]
            inside = np.all((pts >= 0.0) & (pts < 1.0), axis=1)
            cols = np.floor(pts[inside] * side).astype(int)
            # column-major pixel index: row + side * col
            idx = cols[:, 1] + side * cols[:, 0]
            np.add.at(A[a * side + i], idx, step)
    return A


def _discrete_gradient(side: int) -> np.ndarray:
    """Stacked vertical and horizontal forward differences on a side x side
    image flattened column-major."""
    diff = np.zeros((side - 1, side))
    idx = np.arange(side - 1)
    diff[idx, idx] = -1.0
    diff[idx, idx + 1] = 1.0
    eye = np.eye(side)
    return np.vstack([np.kron(eye, diff), np.kron(diff, eye)])


def make_toy_ct(
    image_side: int = 8,
    n_materials: int = 2,
    n_energies: int = 8,
    n_windows: int = 4,
    n_angles: int = 12,
    seed: int = 0,
    upper_bound: float = 1.5,
    gamma1: float = 0.05,
    gamma2: float = 0.005,
    noise_level: float = 1e-3,
) -> SpectralCtProblem:
    """Small two-material phantom with a deliberately tight upper bound.

    The material-1 ground truth contains a disk with weight above
    ``upper_bound``, so the recovered solution has active constraints there.
    Data are generated by the forward model plus Gaussian noise of relative
    size ``noise_level``.
    """
    if image_side**2 > 256:
        raise ValueError("toy model is limited to images up to 16 x 16")
    if n_materials != 2:
        raise ValueError("the toy phantom is defined for exactly 2 materials")

    rng = np.random.default_rng(seed)
    side = image_side
    n_v = side * side

    e = np.linspace(0.0, 1.0, n_energies)
    centers = np.linspace(0.15, 0.85, n_windows)
    spectra = np.exp(-(((e[:, None] - centers[None, :]) / 0.18) ** 2))
    attenuation = np.column_stack(
        [
            0.8 * np.exp(-1.5 * e) + 0.2,
            0.3 + 0.5 / (1.0 + np.exp(-8.0 * (e - 0.5))),
        ]
    )

    rays = _parallel_beam_rays(side, n_angles)
    grad_op = _discrete_gradient(side)

    # ground truth: smooth material 1 with an over-bound disk, sparse material 2
    xs = (np.arange(side) + 0.5) / side
    col, row = np.meshgrid(xs, xs)  # row, col in [0,1); column-major flatten
    disk = (row - 0.55) ** 2 + (col - 0.45) ** 2 < 0.25**2
    mat1 = np.where(disk, 2.0, 0.3)
    mat2 = np.zeros((side, side))
    q = slice(side // 2, side // 2 + max(2, side // 4))
    mat2[q, q] = 1.2
    w_true = np.concatenate([mat1.ravel(order="F"), mat2.ravel(order="F")])

    lower = np.zeros(n_v * n_materials)
    upper = np.full(n_v * n_materials, float(upper_bound))
    bounds = BoxBounds(lower, upper)

    W_true = w_true.reshape((n_v, n_materials), order="F")
    clean = (np.exp(-(rays @ W_true @ attenuation.T)) @ spectra).ravel(order="F")
    y = clean + noise_level * np.std(clean) * rng.standard_normal(clean.size)

    return SpectralCtProblem(
        spectra=spectra,
        attenuation=attenuation,
        rays=rays,
        grad_op=grad_op,
        y=y,
        gamma1=gamma1,
        gamma2=gamma2,
        bounds=bounds,
        x0=np.full(n_v * n_materials, 0.5 * min(1.0, upper_bound)),
        w_true=w_true,
    )
