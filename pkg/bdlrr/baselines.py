"""
Reference solvers: robust PCA and low-rank representation.

Both use the inexact augmented Lagrange multiplier scheme with the same
penalty schedule as the main solver (mu0, rho, mu_max).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from bdlrr.errors import DimensionError, DivergenceError, NumericalError
from bdlrr.prox import as_matrix, inf_norm, row_group_shrink, soft_threshold, svt
from bdlrr.solver import ConvergenceHistory, ConvergenceRecord, SolverConfig

logger = logging.getLogger(__name__)

_DEFAULTS = SolverConfig()
_GROWTH_GATE = 1e-3


@dataclass(frozen=True)
class BaselineResult:
    """Recovered component (X0 for RPCA, Z for LRR), the error E and the history."""

    recovered: np.ndarray
    E: np.ndarray
    history: ConvergenceHistory
    converged: bool

    @property
    def X0(self) -> np.ndarray:
        return self.recovered

    @property
    def Z(self) -> np.ndarray:
        return self.recovered


def _check(name: str, M: np.ndarray, iteration: int) -> np.ndarray:
    if not np.all(np.isfinite(M)):
        raise DivergenceError(name, iteration)
    return M


def rpca_solve(
    X,
    lam: float | None = None,
    tol: float = 1e-7,
    max_iter: int = 1000,
    mu0: float = _DEFAULTS.mu0,
    rho: float = _DEFAULTS.rho,
    mu_max: float = _DEFAULTS.mu_max,
) -> BaselineResult:
    """
    Robust PCA, min ||X0||_* + lam ||E||_1 s.t. X = X0 + E.

    The multiplier starts at X / max(||X||_2, ||X||_inf / lam), the
    dual-feasible point of the inexact ALM. mu grows only on iterations
    whose scaled E change mu ||E_k - E_k-1||_F / ||X||_F is below
    _GROWTH_GATE, and the run stops once that change and the relative
    feasibility residual are both at most tol.

    Args:
        X: d x n data matrix
        lam: Sparse-error weight, 1/sqrt(max(d, n)) if omitted
        tol: Tolerance on the relative residual and the scaled E change
        max_iter: Iteration cap
        mu0, rho, mu_max: Penalty schedule

    Returns:
        BaselineResult with recovered = X0
    """
    X = as_matrix(X, "X")
    d, n = X.shape
    if lam is None:
        lam = 1.0 / np.sqrt(max(d, n))
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")

    x_norm = np.linalg.norm(X)
    scale = max(scipy.linalg.norm(X, 2), np.max(np.abs(X)) / lam)
    C = X / scale if scale > 0 else np.zeros_like(X)
    X0 = np.zeros_like(X)
    E = np.zeros_like(X)
    mu = mu0
    history = ConvergenceHistory()
    done = False
    for t in range(1, max_iter + 1):
        X0 = _check("X0", svt(X - E + C / mu, 1.0 / mu), t)
        E_prev = E
        E = _check("E", soft_threshold(X - X0 + C / mu, lam / mu), t)
        residual = X - X0 - E
        C = C + mu * residual

        res_fro = np.linalg.norm(residual)
        change = mu * np.linalg.norm(E - E_prev)
        if x_norm > 0:
            res_fro, change = res_fro / x_norm, change / x_norm
        if change < _GROWTH_GATE:
            mu = min(mu_max, rho * mu)
        history.append(
            ConvergenceRecord(
                iteration=t,
                relative_error=float(res_fro),
                feas_residual=inf_norm(residual),
                pz_residual=0.0,
                qz_residual=0.0,
                mu=mu,
            )
        )
        if res_fro <= tol and change <= tol:
            done = True
            break

    logger.info(f"rpca: {len(history)} iterations, converged={done}")
    return BaselineResult(recovered=X0, E=E, history=history, converged=done)


def lrr_solve(
    X,
    D_dict=None,
    lam: float = _DEFAULTS.lambda3,
    tol: float = _DEFAULTS.tol,
    max_iter: int = _DEFAULTS.max_iter,
    mu0: float = _DEFAULTS.mu0,
    rho: float = _DEFAULTS.rho,
    mu_max: float = _DEFAULTS.mu_max,
) -> BaselineResult:
    """
    Low-rank representation, min ||Z||_* + lam ||E||_21 s.t. X = D_dict Z + E.

    The auxiliary copy J = Z carries the nuclear norm; E uses row-group
    shrinkage like the main solver.

    Args:
        X: d x N data matrix
        D_dict: d x m dictionary, X itself if omitted
        lam: Noise weight
        tol: Stop when the max-row-sum norms of X - D Z - E and J - Z are <= tol
        max_iter: Iteration cap
        mu0, rho, mu_max: Penalty schedule

    Returns:
        BaselineResult with recovered = Z (m x N)
    """
    X = as_matrix(X, "X")
    D_dict = X if D_dict is None else as_matrix(D_dict, "D_dict")
    if D_dict.shape[0] != X.shape[0]:
        raise DimensionError(f"dictionary has {D_dict.shape[0]} rows, X has {X.shape[0]}")
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")

    m, N = D_dict.shape[1], X.shape[1]
    DtD = D_dict.T @ D_dict
    DtD.flat[:: m + 1] += 1.0
    try:
        factor = scipy.linalg.cho_factor(DtD, lower=True, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"factorization of I + D^T D failed: {e}") from e

    x_norm = np.linalg.norm(X)
    Z = np.zeros((m, N))
    J = np.zeros((m, N))
    E = np.zeros_like(X)
    C1 = np.zeros_like(X)
    C2 = np.zeros((m, N))
    mu = mu0
    history = ConvergenceHistory()
    done = False
    for t in range(1, max_iter + 1):
        J = _check("J", svt(Z + C2 / mu, 1.0 / mu), t)
        rhs = D_dict.T @ (X - E + C1 / mu) + J - C2 / mu
        Z = _check("Z", scipy.linalg.cho_solve(factor, rhs, check_finite=False), t)
        E = _check("E", row_group_shrink(X - D_dict @ Z + C1 / mu, lam / mu), t)

        feas = X - D_dict @ Z - E
        C1 = C1 + mu * feas
        C2 = C2 + mu * (Z - J)
        mu = min(mu_max, rho * mu)

        feas_fro = np.linalg.norm(feas)
        record = ConvergenceRecord(
            iteration=t,
            relative_error=float(feas_fro / x_norm) if x_norm > 0 else float(feas_fro),
            feas_residual=inf_norm(feas),
            pz_residual=inf_norm(J - Z),
            qz_residual=0.0,
            mu=mu,
        )
        history.append(record)
        logger.debug(
            f"lrr iter {t}: mu={mu:.3e} feas={record.feas_residual:.3e} jz={record.pz_residual:.3e}"
        )
        if record.max_residual <= tol:
            done = True
            break

    logger.info(f"lrr: {len(history)} iterations, converged={done}")
    return BaselineResult(recovered=Z, E=E, history=history, converged=done)
