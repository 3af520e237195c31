"""
Matrix kernels and proximal operators.

Every solver in the package is built from the operators in this module:
thin SVD, singular value thresholding, scalar and weighted elementwise
soft-thresholding, and row-group (L21) shrinkage. All functions are pure.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from bdlrr.errors import DimensionError, NumericalError

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-12


# ---------- Matrix helpers ----------


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """
    Coerce input to a finite, non-empty 2-D float64 array.

    Args:
        M: Array-like input
        name: Name used in error messages

    Returns:
        The input as a 2-D float64 ndarray

    Raises:
        ValueError: if the input is not 2-D, is empty, or has NaN/Inf entries
    """
    arr = np.asarray(M, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _check_threshold(tau: float) -> float:
    tau = float(tau)
    if not tau >= 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    return tau


def nuclear_norm(M) -> float:
    """Sum of singular values."""
    return float(np.sum(scipy.linalg.svd(np.asarray(M, dtype=np.float64), compute_uv=False)))


def l21_norm(M) -> float:
    """Sum of the Euclidean norms of the rows of M."""
    return float(np.sum(np.linalg.norm(np.asarray(M, dtype=np.float64), axis=1)))


def inf_norm(M) -> float:
    """Maximum absolute row sum, max_i sum_j |m_ij|."""
    return float(np.max(np.sum(np.abs(M), axis=1)))


# ---------- Thin SVD ----------


@dataclass(frozen=True)
class SvdResult:
    """Economy-size SVD, M = U diag(singular_values) V^T."""

    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.singular_values) @ self.V.T


def svd_thin(M) -> SvdResult:
    """
    Compute the economy-size SVD of M.

    The divide-and-conquer LAPACK driver is tried first; on failure the
    QR-iteration driver is used before giving up.

    Args:
        M: Finite d x n matrix

    Returns:
        SvdResult with r = min(d, n) components and nonincreasing singular values

    Raises:
        NumericalError: if neither LAPACK driver converges
    """
    M = as_matrix(M, "M")
    for driver in ("gesdd", "gesvd"):
        try:
            U, s, Vt = scipy.linalg.svd(
                M, full_matrices=False, lapack_driver=driver, check_finite=False
            )
        except (np.linalg.LinAlgError, ValueError) as e:
            logger.warning(f"SVD driver {driver} failed on {M.shape} matrix: {e}")
            continue
        return SvdResult(U=U, singular_values=s, V=Vt.T)
    raise NumericalError(f"SVD did not converge for a {M.shape[0]}x{M.shape[1]} matrix")


def numerical_rank(svd: SvdResult) -> int:
    """Number of singular values above RANK_RTOL * sigma_1."""
    s = svd.singular_values
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > RANK_RTOL * s[0]))


# ---------- Proximal operators ----------


def soft_threshold(x, lam: float):
    """
    Soft-thresholding operator S_lam(x) = sign(x) * max(|x| - lam, 0).

    Works on scalars and elementwise on arrays; lam may itself be an
    array broadcastable against x.
    """
    lam_arr = np.asarray(lam, dtype=np.float64)
    if np.any(lam_arr < 0):
        raise ValueError("threshold must be nonnegative")
    out = np.sign(x) * np.maximum(np.abs(x) - lam_arr, 0.0)
    if np.ndim(out) == 0:
        return float(out)
    return out


def svt(M, tau: float) -> np.ndarray:
    """
    Singular value thresholding, the proximal operator of tau * ||.||_*.

    Args:
        M: Input matrix
        tau: Nonnegative threshold

    Returns:
        U diag(max(sigma - tau, 0)) V^T
    """
    tau = _check_threshold(tau)
    svd = svd_thin(M)
    shrunk = np.maximum(svd.singular_values - tau, 0.0)
    keep = shrunk > 0
    if not np.any(keep):
        return np.zeros((svd.U.shape[0], svd.V.shape[0]))
    return (svd.U[:, keep] * shrunk[keep]) @ svd.V[:, keep].T


def weighted_l1_prox(M, Wt, tau: float) -> np.ndarray:
    """
    Proximal operator of tau * sum_ij Wt_ij |Q_ij|.

    Args:
        M: Input matrix
        Wt: Nonnegative weights, same shape as M
        tau: Nonnegative scale

    Returns:
        Matrix with entries soft_threshold(M_ij, tau * Wt_ij)
    """
    tau = _check_threshold(tau)
    M = np.asarray(M, dtype=np.float64)
    Wt = np.asarray(Wt, dtype=np.float64)
    if M.shape != Wt.shape:
        raise DimensionError(f"weights shape {Wt.shape} does not match {M.shape}")
    if np.any(Wt < 0):
        raise ValueError("weights must be nonnegative")
    return np.sign(M) * np.maximum(np.abs(M) - tau * Wt, 0.0)


def row_group_shrink(G, tau: float) -> np.ndarray:
    """
    Proximal operator of tau * ||E||_21 with row groups.

    Row i becomes ((||G^i|| - tau) / ||G^i||) G^i when ||G^i|| > tau and
    zero otherwise.
    """
    tau = _check_threshold(tau)
    G = np.asarray(G, dtype=np.float64)
    norms = np.linalg.norm(G, axis=1)
    scale = np.zeros_like(norms)
    alive = norms > tau
    scale[alive] = (norms[alive] - tau) / norms[alive]
    return G * scale[:, None]
