"""
ADMM solver for block-diagonal low-rank representation learning.

Solves

    min_{Z,E} ||Z||_* + lambda1 ||Atilde o Z||_F^2 + lambda2 ||D o Z||_1
              + lambda3 ||E||_21   s.t.  X = X_tr Z + E

by splitting Z into the auxiliary copies P (nuclear norm) and Q
(weighted L1) and alternating closed-form updates with multiplier ascent
and a geometrically growing penalty mu.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field, model_validator

from bdlrr.errors import DimensionError, DivergenceError, NumericalError
from bdlrr.prox import (
    as_matrix,
    inf_norm,
    l21_norm,
    nuclear_norm,
    row_group_shrink,
    svt,
    weighted_l1_prox,
)
from bdlrr.structure import (
    ClassPartition,
    block_target_R,
    build_block_mask_Y,
    build_distance_D,
    build_offblock_mask_A,
    extend_mask_Atilde,
)

logger = logging.getLogger(__name__)


# ---------- Configuration ----------


class SolverConfig(BaseModel):
    """Hyperparameters of the ADMM solver."""

    model_config = ConfigDict(frozen=True)

    lambda1: float = Field(default=5.0, ge=0, description="Weight of the off-block-diagonal penalty")
    lambda2: float = Field(default=0.5, ge=0, description="Weight of the distance-weighted L1 penalty")
    lambda3: float = Field(default=15.0, gt=0, description="Weight of the L21 noise penalty")
    rho: float = Field(default=1.15, gt=1, description="Growth factor of the penalty mu")
    mu0: float = Field(default=0.1, gt=0, description="Initial penalty mu")
    mu_max: float = Field(default=1e8, gt=0, description="Upper bound on the penalty mu")
    tol: float = Field(default=1e-6, gt=0, description="Convergence tolerance on the max-row-sum residuals")
    max_iter: int = Field(default=500, ge=1, description="Iteration cap")

    @model_validator(mode="after")
    def _check_mu(self) -> "SolverConfig":
        if not self.mu0 < self.mu_max:
            raise ValueError(f"mu0 ({self.mu0}) must be smaller than mu_max ({self.mu_max})")
        return self


# ---------- State and history ----------


@dataclass
class SolverState:
    """Full ADMM iterate."""

    Z: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    E: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    C3: np.ndarray
    mu: float
    iteration: int = 0

    @classmethod
    def initial(cls, d: int, n: int, N: int, mu0: float) -> "SolverState":
        """All-zero primal and dual variables."""
        return cls(
            Z=np.zeros((n, N)),
            P=np.zeros((n, N)),
            Q=np.zeros((n, N)),
            E=np.zeros((d, N)),
            C1=np.zeros((d, N)),
            C2=np.zeros((n, N)),
            C3=np.zeros((n, N)),
            mu=float(mu0),
        )


@dataclass(frozen=True)
class ConvergenceRecord:
    """Residuals after one iteration; mu is the penalty after that iteration's growth."""

    iteration: int
    relative_error: float
    feas_residual: float
    pz_residual: float
    qz_residual: float
    mu: float

    @property
    def max_residual(self) -> float:
        return max(self.feas_residual, self.pz_residual, self.qz_residual)


@dataclass
class ConvergenceHistory:
    """Per-iteration convergence records of one solver run."""

    CSV_HEADER = ("iter", "relative_error", "feas_residual", "pz_residual", "qz_residual", "mu")

    records: list[ConvergenceRecord] = field(default_factory=list)

    def append(self, record: ConvergenceRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ConvergenceRecord]:
        return iter(self.records)

    def __getitem__(self, index: int) -> ConvergenceRecord:
        return self.records[index]

    @property
    def relative_errors(self) -> np.ndarray:
        return np.array([r.relative_error for r in self.records])

    @property
    def mus(self) -> np.ndarray:
        return np.array([r.mu for r in self.records])

    def to_csv(self, path: str | Path) -> None:
        """Write the history with one row per iteration and 17 significant digits."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.CSV_HEADER)
            for r in self.records:
                writer.writerow(
                    [r.iteration]
                    + [
                        f"{v:.17g}"
                        for v in (r.relative_error, r.feas_residual, r.pz_residual, r.qz_residual, r.mu)
                    ]
                )

    @classmethod
    def read_csv(cls, path: str | Path) -> "ConvergenceHistory":
        history = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                history.append(
                    ConvergenceRecord(
                        iteration=int(row["iter"]),
                        relative_error=float(row["relative_error"]),
                        feas_residual=float(row["feas_residual"]),
                        pz_residual=float(row["pz_residual"]),
                        qz_residual=float(row["qz_residual"]),
                        mu=float(row["mu"]),
                    )
                )
        return history


# ---------- Cached Gram eigendecomposition ----------


@dataclass(frozen=True)
class GramCache:
    """Eigendecomposition V diag(w) V^T of X_tr^T X_tr."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @classmethod
    def from_training(cls, X_tr: np.ndarray) -> "GramCache":
        try:
            w, V = scipy.linalg.eigh(X_tr.T @ X_tr)
        except np.linalg.LinAlgError as e:
            raise NumericalError(f"eigendecomposition of the Gram matrix failed: {e}") from e
        return cls(eigenvalues=w, eigenvectors=V)

    def solve_shifted(self, shift: float, rhs: np.ndarray) -> np.ndarray:
        """Solve (shift * I + X_tr^T X_tr) Z = rhs."""
        V = self.eigenvectors
        return V @ ((V.T @ rhs) / (self.eigenvalues + shift)[:, None])


# ---------- Subproblem updates ----------


def update_Z(
    state: SolverState,
    X: np.ndarray,
    X_tr: np.ndarray,
    R: np.ndarray,
    config: SolverConfig,
    gram: GramCache | None = None,
) -> np.ndarray:
    """
    Closed-form Z update.

    Z = [(2 + lambda1/mu) I + X_tr^T X_tr]^-1 (lambda1/mu R + X_tr^T S1 + S2 + S3)
    with S1 = X - E + C1/mu, S2 = P + C2/mu, S3 = Q + C3/mu.

    The extended off-block mask Atilde is not an argument: the quadratic
    surrogate replaces ||Atilde o Z||_F^2 by ||Z - R||_F^2, so the mask
    enters only through R (zero on every entry Atilde covers).

    Args:
        state: Current iterate; P must already hold this iteration's value
        X: d x N data matrix
        X_tr: d x n training matrix
        R: Block target built from the previous Z
        config: Solver hyperparameters
        gram: Cached Gram eigendecomposition, computed on the fly if omitted

    Returns:
        The new n x N representation
    """
    mu = state.mu
    S1 = X - state.E + state.C1 / mu
    S2 = state.P + state.C2 / mu
    S3 = state.Q + state.C3 / mu
    rhs = (config.lambda1 / mu) * R + X_tr.T @ S1 + S2 + S3
    if gram is None:
        gram = GramCache.from_training(X_tr)
    return gram.solve_shifted(2.0 + config.lambda1 / mu, rhs)


def update_P(state: SolverState) -> np.ndarray:
    """Nuclear-norm step: svt(Z - C2/mu, 1/mu)."""
    return svt(state.Z - state.C2 / state.mu, 1.0 / state.mu)


def update_Q(state: SolverState, D: np.ndarray, config: SolverConfig) -> np.ndarray:
    """Distance-weighted L1 step on M = Z - C3/mu with thresholds lambda2 D_ij / mu."""
    return weighted_l1_prox(state.Z - state.C3 / state.mu, D, config.lambda2 / state.mu)


def update_E(state: SolverState, X: np.ndarray, X_tr: np.ndarray, config: SolverConfig) -> np.ndarray:
    """Row-group shrinkage of X - X_tr Z + C1/mu with threshold lambda3/mu."""
    gamma = X - X_tr @ state.Z + state.C1 / state.mu
    return row_group_shrink(gamma, config.lambda3 / state.mu)


def step_multipliers(
    state: SolverState, X: np.ndarray, X_tr: np.ndarray, config: SolverConfig
) -> SolverState:
    """Dual ascent on C1, C2, C3 followed by mu <- min(mu_max, rho mu)."""
    mu = state.mu
    return replace(
        state,
        C1=state.C1 + mu * (X - X_tr @ state.Z - state.E),
        C2=state.C2 + mu * (state.P - state.Z),
        C3=state.C3 + mu * (state.Q - state.Z),
        mu=min(config.mu_max, config.rho * mu),
    )


def converged(
    state: SolverState, X: np.ndarray, X_tr: np.ndarray, tol: float
) -> tuple[bool, ConvergenceRecord]:
    """
    Check the stopping rule on the max-row-sum norms of the three residuals.

    Returns:
        (stop, record) where record also carries ||X - X_tr Z - E||_F / ||X||_F
    """
    feas = X - X_tr @ state.Z - state.E
    x_norm = np.linalg.norm(X)
    feas_fro = np.linalg.norm(feas)
    record = ConvergenceRecord(
        iteration=state.iteration,
        relative_error=float(feas_fro / x_norm) if x_norm > 0 else float(feas_fro),
        feas_residual=inf_norm(feas),
        pz_residual=inf_norm(state.P - state.Z),
        qz_residual=inf_norm(state.Q - state.Z),
        mu=state.mu,
    )
    return record.max_residual <= tol, record


def objective(Z, E, Atilde, D, config: SolverConfig) -> float:
    """Value of the block-diagonal low-rank objective at (Z, E)."""
    return (
        nuclear_norm(Z)
        + config.lambda1 * float(np.sum((Atilde * Z) ** 2))
        + config.lambda2 * float(np.sum(np.abs(D * Z)))
        + config.lambda3 * l21_norm(E)
    )


# ---------- Driver ----------


@dataclass(frozen=True)
class SolveResult:
    """Final representation Z = [Z_tr, Z_tt], noise E and convergence data."""

    Z: np.ndarray
    E: np.ndarray
    history: ConvergenceHistory
    converged: bool
    objective: float

    @property
    def iterations(self) -> int:
        return len(self.history)

    @property
    def n_train(self) -> int:
        return self.Z.shape[0]

    @property
    def z_train(self) -> np.ndarray:
        return self.Z[:, : self.n_train]

    @property
    def z_test(self) -> np.ndarray:
        return self.Z[:, self.n_train :]


def _ensure_finite(name: str, M: np.ndarray, iteration: int) -> np.ndarray:
    if not np.all(np.isfinite(M)):
        raise DivergenceError(name, iteration)
    return M


class BdlrrSolver:
    """
    Owns the structure matrices and iterate of one ADMM run.

    Inside an iteration P is updated first (from the previous Z) because
    the Z subproblem uses the new P; then Z, Q, E, the multipliers and mu
    follow, and the residuals are checked.
    """

    def __init__(
        self,
        X_tr,
        X,
        partition: ClassPartition,
        config: SolverConfig | None = None,
    ):
        self.config = config or SolverConfig()
        self.X_tr = as_matrix(X_tr, "X_tr")
        self.X = as_matrix(X, "X")
        d, n = self.X_tr.shape
        if self.X.shape[0] != d:
            raise DimensionError(f"X has {self.X.shape[0]} rows, X_tr has {d}")
        if partition.n_samples != n:
            raise DimensionError(
                f"partition covers {partition.n_samples} samples but X_tr has {n} columns"
            )
        N = self.X.shape[1]
        if N < n:
            raise DimensionError(f"X has {N} columns, fewer than the {n} training columns")

        self.partition = partition
        self.Y = build_block_mask_Y(partition)
        self.Atilde = extend_mask_Atilde(build_offblock_mask_A(partition), N)
        self.D = build_distance_D(self.X_tr, self.X)
        self.gram = GramCache.from_training(self.X_tr)
        self.state = SolverState.initial(d, n, N, self.config.mu0)
        self.history = ConvergenceHistory()

    def step(self) -> tuple[bool, ConvergenceRecord]:
        """Run one ADMM iteration and return the convergence check."""
        s = self.state
        t = s.iteration + 1
        cfg = self.config

        P = _ensure_finite("P", update_P(s), t)
        R = block_target_R(self.Y, s.Z)
        s = replace(s, P=P)
        Z = _ensure_finite("Z", update_Z(s, self.X, self.X_tr, R, cfg, self.gram), t)
        s = replace(s, Z=Z)
        Q = _ensure_finite("Q", update_Q(s, self.D, cfg), t)
        s = replace(s, Q=Q)
        E = _ensure_finite("E", update_E(s, self.X, self.X_tr, cfg), t)
        s = replace(s, E=E)
        s = step_multipliers(s, self.X, self.X_tr, cfg)
        s = replace(s, iteration=t)
        for name in ("C1", "C2", "C3"):
            _ensure_finite(name, getattr(s, name), t)

        self.state = s
        done, record = converged(s, self.X, self.X_tr, cfg.tol)
        self.history.append(record)
        logger.debug(
            f"iter {t}: mu={record.mu:.3e} feas={record.feas_residual:.3e} "
            f"pz={record.pz_residual:.3e} qz={record.qz_residual:.3e} "
            f"rel_err={record.relative_error:.3e}"
        )
        return done, record

    def run(self) -> SolveResult:
        """Iterate until the residuals drop below tol or max_iter is reached."""
        done = False
        while not done and self.state.iteration < self.config.max_iter:
            done, _ = self.step()

        if done:
            logger.info(f"converged after {self.state.iteration} iterations")
        else:
            logger.warning(
                f"no convergence after {self.config.max_iter} iterations "
                f"(max residual {self.history[-1].max_residual:.3e})"
            )
        return SolveResult(
            Z=self.state.Z,
            E=self.state.E,
            history=self.history,
            converged=done,
            objective=objective(self.state.Z, self.state.E, self.Atilde, self.D, self.config),
        )


def solve(X_tr, X, partition: ClassPartition, config: SolverConfig | None = None) -> SolveResult:
    """
    Learn the joint training/test representation.

    Args:
        X_tr: d x n class-sorted, unit-normalized training matrix
        X: d x N matrix [X_tr, X_tt]
        partition: Class sizes of X_tr
        config: Solver hyperparameters (defaults if omitted)

    Returns:
        SolveResult; check ``converged`` for the stopping reason

    Raises:
        DivergenceError: if an iterate becomes non-finite
    """
    return BdlrrSolver(X_tr, X, partition, config).run()
