"""
Ridge classifier on learned representations.

W = L Z_tr^T (Z_tr Z_tr^T + gamma I)^-1 is fitted from the one-hot label
matrix L, and a test column z is assigned to argmax_j (W z)_j.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from bdlrr.data import load_matrix, save_matrix
from bdlrr.errors import DimensionError, ParseError, SingularSystemError
from bdlrr.prox import as_matrix
from bdlrr.structure import ClassPartition

logger = logging.getLogger(__name__)

DEFAULT_GAMMA = 1.0


@dataclass(frozen=True)
class TrainedModel:
    """Fitted classifier plus what prediction and out-of-sample solves need."""

    W: np.ndarray
    gamma: float
    partition: ClassPartition | None
    Z_tr: np.ndarray
    solver_params: dict[str, float] = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]

    def scores(self, Z_tt) -> np.ndarray:
        """Class scores W Z_tt, one column per sample."""
        Z_tt = np.asarray(Z_tt, dtype=np.float64)
        if Z_tt.ndim == 1:
            Z_tt = Z_tt[:, None]
        if Z_tt.shape[0] != self.W.shape[1]:
            raise DimensionError(
                f"representation has {Z_tt.shape[0]} rows, classifier expects {self.W.shape[1]}"
            )
        return self.W @ Z_tt


def one_hot(labels, n_classes: int) -> np.ndarray:
    """
    Label matrix L (C x n) with a single 1 per column at row label_j.

    Args:
        labels: Class indices numbered 1..C
        n_classes: Number of classes C

    Raises:
        ValueError: if a label falls outside 1..C
    """
    labels = np.asarray(labels, dtype=np.int64)
    bad = (labels < 1) | (labels > n_classes)
    if np.any(bad):
        raise ValueError(
            f"labels must lie in 1..{n_classes}, got {sorted(set(labels[bad].tolist()))}"
        )
    L = np.zeros((n_classes, labels.size))
    L[labels - 1, np.arange(labels.size)] = 1.0
    return L


def fit_ridge(
    Z_tr,
    L,
    gamma: float = DEFAULT_GAMMA,
    partition: ClassPartition | None = None,
    solver_params: dict[str, float] | None = None,
) -> TrainedModel:
    """
    Fit the ridge classifier W = L Z^T (Z Z^T + gamma I)^-1.

    The normal equations are solved through a Cholesky factorization of
    the symmetric positive (semi)definite matrix Z Z^T + gamma I.

    Args:
        Z_tr: Training representation, one column per training sample
        L: C x n one-hot label matrix
        gamma: Ridge penalty, must be > 0 when Z Z^T is singular
        partition: Class partition, inferred from L if omitted
        solver_params: Solver hyperparameters to carry with the model

    Raises:
        SingularSystemError: if gamma == 0 and Z Z^T is singular
    """
    Z_tr = as_matrix(Z_tr, "Z_tr")
    L = as_matrix(L, "L")
    if Z_tr.shape[1] != L.shape[1]:
        raise DimensionError(f"Z_tr has {Z_tr.shape[1]} columns but L has {L.shape[1]}")
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")

    A = Z_tr @ Z_tr.T
    A.flat[:: A.shape[0] + 1] += gamma
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(
            f"Z Z^T + {gamma} I is singular; use gamma > 0"
        ) from e
    W = scipy.linalg.cho_solve(factor, Z_tr @ L.T, check_finite=False).T

    if partition is None:
        counts = np.rint(L.sum(axis=1)).astype(int)
        if np.all(counts > 0):
            partition = ClassPartition(class_sizes=tuple(int(k) for k in counts))
    logger.debug(f"fitted ridge classifier {W.shape} with gamma={gamma}")
    return TrainedModel(
        W=W,
        gamma=float(gamma),
        partition=partition,
        Z_tr=Z_tr,
        solver_params=dict(solver_params or {}),
    )


def predict(model: TrainedModel, Z_tt) -> np.ndarray:
    """
    Assign each column of Z_tt to argmax_j (W z)_j.

    Ties go to the lowest class index.

    Returns:
        Integer labels numbered 1..C
    """
    return np.argmax(model.scores(Z_tt), axis=0) + 1


# ---------- Persistence ----------


def save_model(model: TrainedModel, directory: str | Path) -> None:
    """Write W.txt, Z_tr.txt and the model.txt metadata file."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_matrix(model.W, directory / "W.txt")
    save_matrix(model.Z_tr, directory / "Z_tr.txt")
    lines = [
        f"gamma={model.gamma!r}",
        f"classes={model.n_classes}",
        "class_sizes="
        + (",".join(str(k) for k in model.partition.class_sizes) if model.partition else ""),
    ]
    lines += [f"{key}={value!r}" for key, value in model.solver_params.items()]
    (directory / "model.txt").write_text("\n".join(lines) + "\n")


def load_model(directory: str | Path) -> TrainedModel:
    """Read a model written by save_model."""
    directory = Path(directory)
    meta_path = directory / "model.txt"
    meta: dict[str, str] = {}
    for lineno, line in enumerate(meta_path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(meta_path, lineno, f"expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        meta[key.strip()] = value.strip()

    for key in ("gamma", "classes", "class_sizes"):
        if key not in meta:
            raise ParseError(meta_path, 0, f"missing {key}= line")
    try:
        sizes = meta.pop("class_sizes")
        partition = (
            ClassPartition(class_sizes=tuple(int(k) for k in sizes.split(",")))
            if sizes
            else None
        )
        gamma = float(meta.pop("gamma"))
        n_classes = int(meta.pop("classes"))
        solver_params = {key: float(value) for key, value in meta.items()}
    except ValueError as e:
        raise ParseError(meta_path, 0, str(e)) from e

    W = load_matrix(directory / "W.txt")
    if W.shape[0] != n_classes:
        raise ParseError(directory / "W.txt", 1, f"expected {n_classes} rows, got {W.shape[0]}")
    return TrainedModel(
        W=W,
        gamma=gamma,
        partition=partition,
        Z_tr=load_matrix(directory / "Z_tr.txt"),
        solver_params=solver_params,
    )
