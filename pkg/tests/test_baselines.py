import numpy as np
import pytest

from bdlrr.baselines import lrr_solve, rpca_solve
from bdlrr.errors import DimensionError
from bdlrr.prox import inf_norm, nuclear_norm
from bdlrr.structure import ClassPartition, off_block_mass_ratio


@pytest.fixture
def corrupted_low_rank(rng):
    L = rng.standard_normal((50, 2)) @ rng.standard_normal((2, 50))
    S = np.zeros((50, 50))
    idx = rng.choice(50 * 50, size=125, replace=False)
    S.flat[idx] = rng.choice([-1.0, 1.0], size=125)
    return L, S


def test_rpca_recovers_low_rank(corrupted_low_rank):
    L, S = corrupted_low_rank
    result = rpca_solve(L + S, lam=1 / np.sqrt(50), max_iter=3000)
    assert result.converged
    assert np.linalg.norm(result.X0 - L) / np.linalg.norm(L) <= 1e-3
    assert result.history[-1].relative_error <= 1e-7


def test_rpca_default_weight(corrupted_low_rank):
    L, S = corrupted_low_rank
    X = (L + S)[:, :30]
    default = rpca_solve(X, max_iter=20)
    explicit = rpca_solve(X, lam=1 / np.sqrt(50), max_iter=20)
    np.testing.assert_array_equal(default.X0, explicit.X0)


def test_rpca_objective_never_exceeds_trivial_splits(rng):
    for _ in range(20):
        X = np.outer(rng.standard_normal(8), rng.standard_normal(6))
        lam = 1 / np.sqrt(8)
        result = rpca_solve(X, lam=lam, max_iter=5000)
        assert result.converged
        objective = nuclear_norm(result.X0) + lam * np.sum(np.abs(result.E))
        assert objective <= nuclear_norm(X) * (1 + 1e-5)
        assert objective <= lam * np.sum(np.abs(X)) * (1 + 1e-5)


def test_rpca_clean_rank_one_stops_at_once(rng):
    u = rng.standard_normal(8)
    X = np.outer(u, np.ones(6))
    result = rpca_solve(X, lam=1.0)
    assert result.converged
    assert len(result.history) == 1
    np.testing.assert_allclose(result.X0, X, atol=1e-12)
    np.testing.assert_array_equal(result.E, 0.0)


def test_rpca_rejects_bad_weight(rng):
    with pytest.raises(ValueError):
        rpca_solve(rng.standard_normal((4, 4)), lam=0.0)


def test_rpca_flags_nonconvergence(corrupted_low_rank):
    L, S = corrupted_low_rank
    result = rpca_solve(L + S, max_iter=5)
    assert not result.converged
    assert len(result.history) == 5


def test_lrr_feasibility(small_dataset):
    X = small_dataset.X_tr
    result = lrr_solve(X)
    assert result.converged
    assert result.Z.shape == (X.shape[1], X.shape[1])
    assert inf_norm(X - X @ result.Z - result.E) <= 1e-6
    mus = result.history.mus
    assert np.all(np.diff(mus) >= 0)


def test_lrr_with_dictionary(small_dataset):
    ds = small_dataset
    result = lrr_solve(ds.X, ds.X_tr, lam=2.0)
    assert result.Z.shape == (ds.X_tr.shape[1], ds.X.shape[1])
    assert result.E.shape == ds.X.shape


def test_lrr_rejects_bad_input(rng):
    with pytest.raises(DimensionError):
        lrr_solve(rng.standard_normal((4, 6)), rng.standard_normal((5, 3)))
    with pytest.raises(ValueError):
        lrr_solve(rng.standard_normal((4, 6)), lam=-1.0)


def test_lrr_separates_independent_subspaces(rng):
    bases = [np.linalg.qr(rng.standard_normal((10, 2)))[0] for _ in range(2)]
    X = np.hstack([B @ rng.standard_normal((2, 10)) for B in bases])
    X /= np.linalg.norm(X, axis=0)
    result = lrr_solve(X, lam=100.0, max_iter=3000)
    assert result.converged
    assert off_block_mass_ratio(result.Z, ClassPartition(class_sizes=(10, 10))) <= 0.05
