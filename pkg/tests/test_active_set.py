"""Active-set estimates, the partitioned direction, and the decoupled projection."""

import numpy as np
import pytest

from pnkhb import (
    BoxBounds,
    IpmConfig,
    Partition,
    augmented_index,
    boundary_index,
    dense_operator,
    lanczos_tridiag,
    apply_pseudoinverse,
    partitioned_direction,
    partitioned_project,
    project,
)
from conftest import random_spd_matrix

BOUNDS = BoxBounds(np.array([0.0, 0.0, 0.0, -np.inf]), np.array([1.0, 1.0, np.inf, 1.0]))
X = np.array([0.005, 0.996, 5.0, 0.5])
EPS = 0.01


def test_boundary_index_masks():
    part = boundary_index(X, BOUNDS, EPS)
    assert part.active.tolist() == [0, 1]
    assert part.inactive.tolist() == [2, 3]
    assert part.epsilon == EPS
    assert part.active_fraction == pytest.approx(0.5)


def test_augmented_index_respects_gradient_sign():
    # coord 0 near lower: active only if the gradient pushes further down
    # coord 1 near upper: active only if the gradient pushes further up
    grad = np.array([1.0, 1.0, -1.0, 0.0])
    part = augmented_index(X, grad, BOUNDS, EPS)
    assert part.active.tolist() == [0]
    grad2 = np.array([-1.0, -1.0, 1.0, 0.0])
    part2 = augmented_index(X, grad2, BOUNDS, EPS)
    assert part2.active.tolist() == [1]


def test_augmented_subset_of_boundary(rng):
    for _ in range(20):
        n = 12
        bounds = BoxBounds(np.full(n, -1.0), np.full(n, 1.0))
        x = bounds.clamp(1.2 * rng.standard_normal(n))
        g = rng.standard_normal(n)
        aug = set(augmented_index(x, g, bounds, 0.05).active.tolist())
        bnd = set(boundary_index(x, bounds, 0.05).active.tolist())
        assert aug <= bnd


def test_epsilon_validation():
    with pytest.raises(ValueError, match="epsilon"):
        boundary_index(X, BOUNDS, 0.0)
    with pytest.raises(ValueError, match="epsilon"):
        augmented_index(X, np.zeros(4), BOUNDS, -1.0)


def test_partition_validation():
    with pytest.raises(ValueError, match="partition"):
        Partition(np.array([0, 1]), np.array([1, 2]), 0.01)
    with pytest.raises(ValueError, match="partition"):
        Partition(np.array([0]), np.array([2]), 0.01)
    triv = Partition.trivial(5)
    assert triv.active.size == 0 and triv.inactive.size == 5
    assert triv.active_fraction == 0.0


def test_trivial_partition_reduces_to_plain_newton(rng):
    n = 8
    A = random_spd_matrix(rng, n)
    g = rng.standard_normal(n)
    part = Partition.trivial(n)
    p, metric = partitioned_direction(dense_operator(A), g, part, 5, 1e-3)
    fact = lanczos_tridiag(dense_operator(A), g, 5, curvature_floor=1e-3)
    assert np.allclose(p, apply_pseudoinverse(fact, g))
    assert metric.fact is not None and metric.nu == 1.0


def test_direction_has_positive_gradient_overlap(rng):
    # step is x - mu * p, so descent requires g^T p > 0
    n = 10
    A = random_spd_matrix(rng, n)
    bounds = BoxBounds(np.full(n, -0.5), np.full(n, 0.5))
    x = bounds.clamp(rng.standard_normal(n))
    g = A @ x + 0.1 * rng.standard_normal(n)
    part = boundary_index(x, bounds, 0.05)
    p, _ = partitioned_direction(dense_operator(A), g, part, 6, 1e-3)
    assert g @ p > 0


def test_active_block_scaling(rng):
    n = 9
    A = random_spd_matrix(rng, n)
    g = rng.standard_normal(n)
    part = Partition(np.arange(3), np.arange(3, n), 0.01)
    p, metric = partitioned_direction(dense_operator(A), g, part, 4, 1e-3)
    # nu equalizes the sup-norms of the two blocks
    assert np.abs(p[part.active]).max() == pytest.approx(
        np.abs(p[part.inactive]).max()
    )
    assert metric.nu == pytest.approx(
        np.abs(g[part.active]).max() / np.abs(p[part.inactive]).max()
    )


def test_zero_inactive_gradient_degenerates(rng):
    n = 6
    A = random_spd_matrix(rng, n)
    g = np.zeros(n)
    g[:2] = [1.0, -2.0]
    part = Partition(np.arange(2), np.arange(2, n), 0.01)
    p, metric = partitioned_direction(dense_operator(A), g, part, 3, 1e-3)
    assert metric.fact is None and metric.nu == 1.0
    assert np.allclose(p[part.active], g[:2])
    assert np.all(p[part.inactive] == 0)


def test_all_active_partition(rng):
    n = 4
    A = random_spd_matrix(rng, n)
    g = rng.standard_normal(n)
    part = Partition(np.arange(n), np.empty(0, dtype=int), 0.01)
    p, metric = partitioned_direction(dense_operator(A), g, part, 2, 1e-3)
    assert np.allclose(p, g)  # nu degenerates to 1
    bounds = BoxBounds(np.full(n, -0.1), np.full(n, 0.1))
    z, report = partitioned_project(metric, 5.0 * g, bounds, IpmConfig())
    assert np.allclose(z, bounds.clamp(5.0 * g))
    assert report.converged and report.iterations == 0


def test_partitioned_metric_apply_blocks(rng):
    n = 8
    A = random_spd_matrix(rng, n)
    g = rng.standard_normal(n)
    part = Partition(np.array([0, 5]), np.array([1, 2, 3, 4, 6, 7]), 0.01)
    p, metric = partitioned_direction(dense_operator(A), g, part, 4, 1e-3)
    v = rng.standard_normal(n)
    out = metric.apply(v)
    assert np.allclose(out[part.active], metric.nu * v[part.active])
    from pnkhb import apply_metric

    want_inact = apply_metric(metric.inactive_metric, v[part.inactive])
    assert np.allclose(out[part.inactive], want_inact)


def test_partitioned_project_decouples(rng):
    n = 9
    A = random_spd_matrix(rng, n)
    g = rng.standard_normal(n)
    part = Partition(np.array([1, 4]), np.array([0, 2, 3, 5, 6, 7, 8]), 0.01)
    p, metric = partitioned_direction(dense_operator(A), g, part, 5, 1e-3)
    bounds = BoxBounds(np.full(n, -0.3), np.full(n, 0.3))
    y = 2.0 * rng.standard_normal(n)
    cfg = IpmConfig(tol=1e-10)
    z, report = partitioned_project(metric, y, bounds, cfg)
    # active block: plain clamp
    assert np.allclose(z[part.active], np.clip(y[part.active], -0.3, 0.3))
    # inactive block: interior-point projection in the restricted metric
    sub_bounds = BoxBounds(bounds.lower[part.inactive], bounds.upper[part.inactive])
    z_sub, _ = project(metric.inactive_metric, y[part.inactive], sub_bounds, cfg)
    assert np.abs(z[part.inactive] - z_sub).max() < 1e-9
    assert report.converged


def test_partitioned_direction_validates(rng):
    A = random_spd_matrix(rng, 4)
    with pytest.raises(ValueError, match="sizes"):
        partitioned_direction(
            dense_operator(A), np.zeros(5), Partition.trivial(4), 2, 1e-3
        )


def test_restricted_operator_is_principal_submatrix(rng):
    from pnkhb.active_set import _restricted_operator

    A = random_spd_matrix(rng, 7)
    idx = np.array([0, 2, 5])
    sub = _restricted_operator(dense_operator(A), idx)
    v = rng.standard_normal(3)
    assert np.allclose(sub.apply(v), A[np.ix_(idx, idx)] @ v)
