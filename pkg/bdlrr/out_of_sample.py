"""
Out-of-sample extension.

A new instance b is represented over the fixed training matrix by the
elastic-net problem

    min_z 1/2 ||b - X_tr z||^2 + beta1/2 ||z||^2 + beta2 ||d o z||_1

with beta1 = lambda1/lambda3, beta2 = lambda2/(2 lambda3) and d the
squared distances from b to the training samples. It is solved by
proximal gradient (ISTA) with a fixed step 1/eta.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field

from bdlrr.classifier import TrainedModel, predict
from bdlrr.errors import DimensionError, NumericalError
from bdlrr.prox import as_matrix, soft_threshold
from bdlrr.solver import SolverConfig
from bdlrr.structure import build_distance_D

logger = logging.getLogger(__name__)


class OosConfig(BaseModel):
    """Parameters of the out-of-sample proximal-gradient solver."""

    model_config = ConfigDict(frozen=True)

    beta1: float = Field(ge=0, description="Ridge weight, lambda1 / lambda3")
    beta2: float = Field(ge=0, description="Weighted L1 weight, lambda2 / (2 lambda3)")
    max_iter: int = Field(default=300, ge=1, description="Iteration cap")
    step_tol: float = Field(default=1e-8, ge=0, description="Stop when max |z_k+1 - z_k| falls below this")
    step_rule: Literal["frobenius", "spectral"] = Field(
        default="frobenius",
        description="eta = ||X_tr||_F^2 + beta1 (frobenius) or sigma_max(X_tr)^2 + beta1 (spectral)",
    )

    @classmethod
    def from_solver_config(cls, config: SolverConfig, **overrides) -> "OosConfig":
        return cls(
            beta1=config.lambda1 / config.lambda3,
            beta2=config.lambda2 / (2.0 * config.lambda3),
            **overrides,
        )


@dataclass(frozen=True)
class OosResult:
    """Representation of one new instance and the objective after every iteration."""

    z: np.ndarray
    objectives: tuple[float, ...]
    iterations: int
    converged: bool


def _as_vector(v, name: str, size: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if size is not None and v.size != size:
        raise DimensionError(f"{name} has length {v.size}, expected {size}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def distance_weights(b, X_tr) -> np.ndarray:
    """Squared distances from b to every training column."""
    X_tr = as_matrix(X_tr, "X_tr")
    b = _as_vector(b, "b", X_tr.shape[0])
    return build_distance_D(X_tr, b[:, None])[:, 0]


def oos_objective(z, b, X_tr, d_w, beta1: float, beta2: float) -> float:
    """1/2 ||b - X_tr z||^2 + beta1/2 ||z||^2 + beta2 ||d_w o z||_1."""
    X_tr = as_matrix(X_tr, "X_tr")
    d, n = X_tr.shape
    z = _as_vector(z, "z", n)
    b = _as_vector(b, "b", d)
    d_w = _as_vector(d_w, "d_w", n)
    residual = b - X_tr @ z
    return float(
        0.5 * residual @ residual + 0.5 * beta1 * z @ z + beta2 * np.sum(np.abs(d_w * z))
    )


def step_size(X_tr: np.ndarray, config: OosConfig) -> float:
    """Inverse step eta, an upper bound on the Lipschitz constant of the smooth part."""
    if config.step_rule == "spectral":
        sigma_max = scipy.linalg.svdvals(X_tr)[0]
        return float(sigma_max**2 + config.beta1)
    return float(np.sum(X_tr**2) + config.beta1)


def oos_solve(b, X_tr, d_w, config: OosConfig) -> OosResult:
    """
    Solve the out-of-sample elastic-net problem by ISTA from z = 0.

    Each step is z <- S_{beta2 d_w / eta}(z - grad g(z) / eta) with
    grad g(z) = X_tr^T (X_tr z - b) + beta1 z.

    Raises:
        NumericalError: if the gradient becomes non-finite
    """
    X_tr = as_matrix(X_tr, "X_tr")
    d, n = X_tr.shape
    b = _as_vector(b, "b", d)
    d_w = _as_vector(d_w, "d_w", n)
    if np.any(d_w < 0):
        raise ValueError("distance weights must be nonnegative")

    eta = step_size(X_tr, config)
    thresholds = config.beta2 * d_w / eta
    z = np.zeros(n)
    objectives = []
    converged = False
    k = 0
    for k in range(1, config.max_iter + 1):
        grad = X_tr.T @ (X_tr @ z - b) + config.beta1 * z
        if not np.all(np.isfinite(grad)):
            raise NumericalError(f"non-finite gradient at out-of-sample iteration {k}")
        z_next = soft_threshold(z - grad / eta, thresholds)
        change = float(np.max(np.abs(z_next - z)))
        z = z_next
        objectives.append(oos_objective(z, b, X_tr, d_w, config.beta1, config.beta2))
        if change <= config.step_tol:
            converged = True
            break

    logger.debug(f"out-of-sample solve: {k} iterations, converged={converged}")
    return OosResult(z=z, objectives=tuple(objectives), iterations=k, converged=converged)


def oos_predict(b, X_tr, model: TrainedModel, config: OosConfig) -> int:
    """Label a new instance through its out-of-sample representation."""
    result = oos_solve(b, X_tr, distance_weights(b, X_tr), config)
    return int(predict(model, result.z)[0])


def oos_predict_batch(B, X_tr, model: TrainedModel, config: OosConfig, workers: int = 1) -> np.ndarray:
    """
    Label every column of B independently.

    Args:
        B: d x m matrix of normalized new instances
        X_tr: d x n training matrix
        model: Trained classifier
        config: Solver parameters
        workers: Number of threads; solves are independent

    Returns:
        Integer labels, one per column
    """
    B = as_matrix(B, "B")
    X_tr = as_matrix(X_tr, "X_tr")
    columns = [B[:, j] for j in range(B.shape[1])]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            labels = list(pool.map(lambda b: oos_predict(b, X_tr, model, config), columns))
    else:
        labels = [oos_predict(b, X_tr, model, config) for b in columns]
    return np.asarray(labels, dtype=np.int64)
