"""Benchmark problems: analytic derivatives against independent constructions."""

import numpy as np
import pytest

from pnkhb import (
    BoxBounds,
    check_gradient,
    make_fig1_problem,
    make_synthetic_mlr,
    make_toy_ct,
)
from pnkhb.problems import (
    QuadraticBoxProblem,
    SpectralCtProblem,
    _discrete_gradient,
    _parallel_beam_rays,
)


# --- 2-d quadratic -----------------------------------------------------------


def test_fig1_constants():
    prob = make_fig1_problem()
    assert np.array_equal(prob.H, [[1.0, 1.0], [1.0, 2.0]])
    assert np.array_equal(prob.b, [1.0, 1.0])
    assert np.array_equal(prob.bounds.lower, [-5.0, 3.0])
    assert np.array_equal(prob.bounds.upper, [0.0, 8.0])
    assert np.array_equal(prob.x0, [-3.0, 7.0])
    # hand-evaluated gradient at the start and the unconstrained minimizer
    assert np.allclose(prob.gradient(prob.x0), [5.0, 12.0])
    assert np.allclose(np.linalg.solve(prob.H, -prob.b), [-1.0, 0.0])


def test_quadratic_problem_validation():
    bounds = BoxBounds(np.zeros(2), np.ones(2))
    with pytest.raises(ValueError):
        QuadraticBoxProblem(H=np.eye(3), b=np.zeros(2), bounds=bounds)
    with pytest.raises(ValueError, match="symmetric"):
        QuadraticBoxProblem(
            H=np.array([[1.0, 2.0], [0.0, 1.0]]), b=np.zeros(2), bounds=bounds
        )


def test_quadratic_objective_and_gradient(rng):
    A = rng.standard_normal((4, 4))
    H = A @ A.T + np.eye(4)
    b = rng.standard_normal(4)
    prob = QuadraticBoxProblem(
        H=H, b=b, bounds=BoxBounds(np.full(4, -1.0), np.full(4, 1.0)),
        x0=np.zeros(4),
    )
    x = rng.standard_normal(4)
    assert prob.value(x) == pytest.approx(0.5 * x @ H @ x + b @ x)
    assert np.allclose(prob.gradient(x), H @ x + b)
    assert check_gradient(prob.objective(), np.zeros(4)) < 1e-7


# --- multinomial logistic regression -----------------------------------------


@pytest.fixture(scope="module")
def mlr():
    return make_synthetic_mlr(n_classes=4, n_f=10, m_f=30, N=300, seed=3)


def test_mlr_uniform_weights_objective(mlr):
    assert mlr.value(np.zeros(mlr.n)) == pytest.approx(np.log(4.0), abs=1e-12)


def test_mlr_hypothesis_on_simplex(mlr, rng):
    x = 0.05 * rng.standard_normal(mlr.n)
    h = mlr.hypothesis(x)
    assert h.min() >= 0
    assert np.abs(h.sum(axis=0) - 1.0).max() < 1e-12


def test_mlr_softmax_shift_invariance(mlr, rng):
    # adding a constant row to the weights leaves the hypothesis unchanged
    x = 0.03 * rng.standard_normal(mlr.n)
    X = x.reshape(mlr.n_classes, mlr.m_f)
    shifted = (X + 0.7 * np.ones((mlr.n_classes, 1)) @ np.ones((1, mlr.m_f))).ravel()
    assert np.abs(mlr.hypothesis(x) - mlr.hypothesis(shifted)).max() < 1e-10


def test_mlr_gradient_is_exact(mlr, rng):
    x = 0.04 * rng.standard_normal(mlr.n)
    assert check_gradient(mlr.objective(), x) < 1e-7


def test_mlr_hessian_symmetric_psd(mlr, rng):
    x = 0.04 * rng.standard_normal(mlr.n)
    op = mlr.hessian_at(x)
    u = rng.standard_normal(mlr.n)
    v = rng.standard_normal(mlr.n)
    assert u @ op.apply(v) == pytest.approx(v @ op.apply(u), rel=1e-10, abs=1e-12)
    assert v @ op.apply(v) >= -1e-12


def test_mlr_hessian_matches_gradient_differences(mlr, rng):
    x = 0.02 * rng.standard_normal(mlr.n)
    v = rng.standard_normal(mlr.n)
    v /= np.linalg.norm(v)
    h = 1e-5
    fd = (mlr.gradient(x + h * v) - mlr.gradient(x - h * v)) / (2 * h)
    hv = mlr.hessian_at(x).apply(v)
    assert np.abs(fd - hv).max() < 1e-6


def test_mlr_bounds_and_start(mlr):
    assert np.all(mlr.bounds.lower == -0.05)
    assert np.all(mlr.bounds.upper == 0.05)
    assert np.all(mlr.x0 == 0.0)
    assert mlr.labels.sum() == mlr.n_samples  # one-hot columns


def test_mlr_size_validation():
    with pytest.raises(ValueError, match="m_f > n_f"):
        make_synthetic_mlr(n_f=50, m_f=50)
    with pytest.raises(ValueError, match="classes"):
        make_synthetic_mlr(n_classes=1)
    with pytest.raises(ValueError, match="sample"):
        make_synthetic_mlr(N=3, n_classes=5)
    with pytest.raises(ValueError, match="bound_magnitude"):
        make_synthetic_mlr(bound_magnitude=0.0)


def test_mlr_seed_controls_data():
    a = make_synthetic_mlr(n_classes=3, n_f=5, m_f=12, N=50, seed=0)
    b = make_synthetic_mlr(n_classes=3, n_f=5, m_f=12, N=50, seed=1)
    assert not np.allclose(a.features, b.features)
    c = make_synthetic_mlr(n_classes=3, n_f=5, m_f=12, N=50, seed=0)
    assert np.array_equal(a.features, c.features)


# --- toy spectral CT ---------------------------------------------------------


def tiny_ct(rng, n_v=4, n_m=2, n_e=5, n_b=3, n_rays=6):
    """Random small instance for dense-reference comparisons."""
    spectra = np.abs(rng.standard_normal((n_e, n_b))) + 0.1
    attenuation = np.abs(rng.standard_normal((n_e, n_m))) * 0.4 + 0.1
    rays = np.abs(rng.standard_normal((n_rays, n_v))) * 0.3
    grad_op = np.diff(np.eye(n_v), axis=0)
    w_true = np.abs(rng.standard_normal(n_v * n_m))
    bounds = BoxBounds(np.zeros(n_v * n_m), np.full(n_v * n_m, 2.0))
    prob = SpectralCtProblem(
        spectra=spectra,
        attenuation=attenuation,
        rays=rays,
        grad_op=grad_op,
        y=np.zeros(n_rays * n_b),
        gamma1=0.07,
        gamma2=0.003,
        bounds=bounds,
        x0=np.full(n_v * n_m, 0.5),
    )
    y = prob.forward(w_true) + 0.01 * rng.standard_normal(n_rays * n_b)
    return SpectralCtProblem(
        spectra=spectra,
        attenuation=attenuation,
        rays=rays,
        grad_op=grad_op,
        y=y,
        gamma1=0.07,
        gamma2=0.003,
        bounds=bounds,
        x0=np.full(n_v * n_m, 0.5),
    )


def test_ct_forward_matches_dense_kronecker(rng):
    prob = tiny_ct(rng)
    w = np.abs(rng.standard_normal(prob.n))
    big = np.kron(prob.attenuation, prob.rays)  # (C kron A)
    inner = np.exp(-big @ w)
    dense = np.kron(prob.spectra.T, np.eye(prob.rays.shape[0])) @ inner
    assert np.abs(prob.forward(w) - dense).max() < 1e-12


def test_ct_jacobian_matches_dense(rng):
    prob = tiny_ct(rng)
    w = np.abs(rng.standard_normal(prob.n)) * 0.5
    big = np.kron(prob.attenuation, prob.rays)
    E_flat = np.exp(-big @ w)
    J = -np.kron(prob.spectra.T, np.eye(prob.rays.shape[0])) @ np.diag(E_flat) @ big
    _, jvp, jtvp = prob._jacobian_pieces(w)
    v = rng.standard_normal(prob.n)
    u = rng.standard_normal(J.shape[0])
    assert np.abs(jvp(v) - J @ v).max() < 1e-12
    assert np.abs(jtvp(u) - J.T @ u).max() < 1e-12


def test_ct_jacobian_adjoint(rng):
    prob = tiny_ct(rng)
    w = np.abs(rng.standard_normal(prob.n)) * 0.5
    _, jvp, jtvp = prob._jacobian_pieces(w)
    v = rng.standard_normal(prob.n)
    u = rng.standard_normal(prob.y.size)
    assert jvp(v) @ u == pytest.approx(v @ jtvp(u), rel=1e-12)


def test_ct_gauss_newton_operator_dense(rng):
    prob = tiny_ct(rng)
    w = np.abs(rng.standard_normal(prob.n)) * 0.5
    big = np.kron(prob.attenuation, prob.rays)
    E_flat = np.exp(-big @ w)
    J = -np.kron(prob.spectra.T, np.eye(prob.rays.shape[0])) @ np.diag(E_flat) @ big
    G = J.T @ J
    n_v = prob.n_voxels
    G[:n_v, :n_v] += prob.gamma1 * (prob.grad_op.T @ prob.grad_op)
    op = prob.hessian_at(w)
    v = rng.standard_normal(prob.n)
    assert np.abs(op.apply(v) - G @ v).max() < 1e-11


def test_ct_gradient_is_exact(rng):
    prob = tiny_ct(rng)
    w = np.abs(rng.standard_normal(prob.n)) * 0.5
    assert check_gradient(prob.objective(), w) < 1e-6


def test_ct_zero_weights_forward():
    prob = make_toy_ct(image_side=4, n_angles=4)
    out = prob.forward(np.zeros(prob.n))
    # exp(0) = 1, so each window's reading is the spectrum column sum
    want = np.tile(prob.spectra.sum(axis=0), (prob.rays.shape[0], 1)).ravel(order="F")
    assert np.abs(out - want).max() < 1e-12


def test_ct_exponent_guard():
    prob = make_toy_ct(image_side=4, n_angles=4)
    with pytest.raises(ValueError, match="badly scaled"):
        prob.forward(np.full(prob.n, 1e6))


def test_ct_default_instance_shapes_and_bounds():
    prob = make_toy_ct()
    assert prob.n_voxels == 64 and prob.n_materials == 2
    assert prob.n == 128
    assert np.all(prob.bounds.lower == 0.0)
    assert np.all(prob.bounds.upper == 1.5)
    # the phantom deliberately exceeds the upper bound inside the disk
    assert prob.w_true.max() > prob.bounds.upper[0]
    assert prob.x0 is not None and prob.bounds.contains(prob.x0)
    assert check_gradient(prob.objective(), prob.x0) < 1e-5


def test_ct_validation():
    with pytest.raises(ValueError, match="16 x 16"):
        make_toy_ct(image_side=20)
    with pytest.raises(ValueError, match="2 materials"):
        make_toy_ct(n_materials=3)


def test_discrete_gradient_annihilates_constants():
    D = _discrete_gradient(5)
    assert D.shape == (2 * 4 * 5, 25)
    assert np.abs(D @ np.ones(25)).max() == 0.0


def test_discrete_gradient_matches_manual(rng):
    side = 4
    D = _discrete_gradient(side)
    img = rng.standard_normal((side, side))
    out = D @ img.ravel(order="F")
    vert = np.diff(img, axis=0).ravel(order="F")  # within-column differences
    horz = np.diff(img, axis=1).ravel(order="F")
    assert np.allclose(np.sort(np.abs(out)), np.sort(np.abs(np.concatenate([vert, horz]))))


def test_parallel_beam_rays_geometry():
    side, n_angles = 6, 3
    A = _parallel_beam_rays(side, n_angles)
    assert A.shape == (side * n_angles, side * side)
    assert np.all(A >= 0)
    # axis-aligned rays traverse the unit square: total length 1 per ray
    row_sums = A[:side].sum(axis=1)
    assert np.abs(row_sums - 1.0).max() < 2.0 / (4 * side)
    # every pixel is hit by some ray
    assert np.all(A.sum(axis=0) > 0)
