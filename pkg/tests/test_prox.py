import numpy as np
import pytest

from bdlrr.errors import DimensionError
from bdlrr.prox import (
    as_matrix,
    inf_norm,
    l21_norm,
    nuclear_norm,
    numerical_rank,
    row_group_shrink,
    soft_threshold,
    svd_thin,
    svt,
    weighted_l1_prox,
)

GRID = np.arange(-6.0, 6.0, 1e-4)


def grid_minimizer(m, threshold):
    """Minimizer of threshold |q| + 1/2 (q - m)^2 over a fine grid."""
    values = threshold * np.abs(GRID) + 0.5 * (GRID - m) ** 2
    return GRID[np.argmin(values)]


# ---------- helpers ----------


def test_as_matrix_rejects_bad_input():
    with pytest.raises(ValueError):
        as_matrix(np.ones(3))
    with pytest.raises(ValueError):
        as_matrix(np.ones((0, 3)))
    with pytest.raises(ValueError):
        as_matrix([[1.0, np.nan]])


def test_norms():
    M = np.array([[3.0, -4.0], [1.0, 0.0]])
    assert l21_norm(M) == pytest.approx(6.0)
    assert inf_norm(M) == pytest.approx(7.0)
    assert nuclear_norm(np.diag([3.0, 1.0])) == pytest.approx(4.0)


# ---------- svd ----------


def test_svd_reconstructs(rng):
    M = rng.standard_normal((8, 6))
    svd = svd_thin(M)
    assert svd.U.shape == (8, 6)
    assert svd.V.shape == (6, 6)
    assert np.all(np.diff(svd.singular_values) <= 0)
    np.testing.assert_allclose(svd.reconstruct(), M, atol=1e-8)


def test_svd_rank_and_zero_matrix(rng):
    B = rng.standard_normal((7, 2)) @ rng.standard_normal((2, 5))
    assert numerical_rank(svd_thin(B)) == 2
    svd = svd_thin(np.zeros((4, 3)))
    np.testing.assert_array_equal(svd.singular_values, 0.0)
    assert numerical_rank(svd) == 0


# ---------- soft threshold ----------


def test_svd_factors_are_orthonormal(rng):
    for shape in ((7, 4), (4, 7), (5, 5)):
        svd = svd_thin(rng.standard_normal(shape))
        r = min(shape)
        np.testing.assert_allclose(svd.U.T @ svd.U, np.eye(r), atol=1e-12)
        np.testing.assert_allclose(svd.V.T @ svd.V, np.eye(r), atol=1e-12)
        assert np.all(np.diff(svd.singular_values) <= 0)


def test_soft_threshold_scalars():
    assert soft_threshold(5.0, 2.0) == 3.0
    assert soft_threshold(-0.5, 1.0) == 0.0
    assert soft_threshold(3.0, 0.0) == 3.0


def test_soft_threshold_negative_threshold():
    with pytest.raises(ValueError):
        soft_threshold(1.0, -0.1)


def test_soft_threshold_matches_grid_search(rng):
    for _ in range(100):
        m = rng.uniform(-4, 4)
        lam = rng.uniform(0, 2)
        assert abs(soft_threshold(m, lam) - grid_minimizer(m, lam)) <= 2e-4


# ---------- weighted L1 ----------


def test_weighted_l1_zero_weights_is_identity(rng):
    M = rng.standard_normal((3, 4))
    np.testing.assert_array_equal(weighted_l1_prox(M, np.zeros_like(M), 2.0), M)


def test_weighted_l1_rejects_bad_weights():
    with pytest.raises(DimensionError):
        weighted_l1_prox(np.ones((2, 2)), np.ones((2, 3)), 1.0)
    with pytest.raises(ValueError):
        weighted_l1_prox(np.ones((2, 2)), -np.ones((2, 2)), 1.0)


def test_weighted_l1_matches_grid_search(rng):
    for _ in range(100):
        m, w, tau = rng.uniform(-4, 4), rng.uniform(0, 2), rng.uniform(0, 1.5)
        q = weighted_l1_prox([[m]], [[w]], tau)[0, 0]
        assert abs(q - grid_minimizer(m, tau * w)) <= 2e-4


# ---------- svt ----------


def test_weighted_l1_is_nonexpansive(rng):
    for _ in range(20):
        A, B = rng.standard_normal((2, 4, 6))
        Wt = rng.uniform(0.0, 2.0, size=(4, 6))
        tau = float(rng.uniform(0.0, 1.5))
        gap = weighted_l1_prox(A, Wt, tau) - weighted_l1_prox(B, Wt, tau)
        assert np.linalg.norm(gap) <= np.linalg.norm(A - B) + 1e-12


def test_svt_diagonal_example():
    M = np.zeros((4, 3))
    M[:3, :3] = np.diag([3.0, 1.0, 0.5])
    out = svt(M, 1.0)
    np.testing.assert_allclose(svd_thin(out).singular_values, [2.0, 0.0, 0.0], atol=1e-12)


def test_svt_large_threshold_gives_zero(rng):
    M = rng.standard_normal((5, 4))
    np.testing.assert_array_equal(svt(M, 1e3), np.zeros((5, 4)))


def test_svt_beats_perturbations(rng):
    tau = 0.7

    def obj(P, M):
        return tau * nuclear_norm(P) + 0.5 * np.sum((P - M) ** 2)

    for _ in range(20):
        M = rng.standard_normal((8, 6))
        P = svt(M, tau)
        best = obj(P, M)
        assert best <= obj(M, M) + 1e-12
        for _ in range(1000):
            delta = rng.standard_normal(P.shape)
            delta *= rng.uniform(1e-4, 1.0) / np.linalg.norm(delta)
            assert best <= obj(P + delta, M) + 1e-12


# ---------- row-group shrinkage ----------


def test_row_group_shrink_example():
    G = np.array([[3.0, 4.0, 0.0], [0.1, 0.1, 0.1]])
    out = row_group_shrink(G, 2.0)
    np.testing.assert_allclose(out[0], [1.8, 2.4, 0.0])
    np.testing.assert_array_equal(out[1], 0.0)


def test_row_group_shrink_beats_perturbations(rng):
    tau = 0.5

    def obj(E, G):
        return tau * l21_norm(E) + 0.5 * np.sum((E - G) ** 2)

    for _ in range(20):
        G = rng.standard_normal((6, 10))
        E = row_group_shrink(G, tau)
        best = obj(E, G)
        assert best <= obj(G, G) + 1e-12
        assert best <= obj(np.zeros_like(G), G) + 1e-12
        for _ in range(1000):
            scaled = G * rng.uniform(0.0, 1.5, size=(6, 1))
            assert best <= obj(scaled, G) + 1e-12
