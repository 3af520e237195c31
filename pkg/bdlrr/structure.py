"""
Structure matrices for block-diagonal representation learning.

Training samples are assumed to be sorted by class, so every class owns
a contiguous range of columns. The builders here turn that partition
into the block mask Y, its complement A, the extended mask used with
test samples, the squared-distance weights D and the block target R.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field, PositiveInt
from scipy.spatial.distance import cdist

from bdlrr.errors import DimensionError, UndefinedRatioError
from bdlrr.prox import as_matrix

logger = logging.getLogger(__name__)


class ClassPartition(BaseModel):
    """Ordered class sizes n_1..n_C of class-sorted training samples."""

    model_config = ConfigDict(frozen=True)

    class_sizes: tuple[PositiveInt, ...] = Field(
        min_length=1, description="Number of training samples in each class, in class order"
    )

    @classmethod
    def from_labels(cls, labels) -> "ClassPartition":
        """
        Build a partition from class-sorted labels numbered 1..C.

        Raises:
            ValueError: if labels are not sorted or a class in 1..C is empty
        """
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size == 0:
            raise ValueError("labels must not be empty")
        if np.any(np.diff(labels) < 0):
            raise ValueError("labels must be sorted so class blocks are contiguous")
        if labels[0] < 1:
            raise ValueError("labels must be numbered from 1")
        counts = np.bincount(labels, minlength=labels.max() + 1)[1:]
        if np.any(counts == 0):
            missing = [i + 1 for i in np.flatnonzero(counts == 0)]
            raise ValueError(f"classes without training samples: {missing}")
        return cls(class_sizes=tuple(int(c) for c in counts))

    @property
    def n_classes(self) -> int:
        return len(self.class_sizes)

    @property
    def n_samples(self) -> int:
        return sum(self.class_sizes)

    def ranges(self) -> list[range]:
        """Column index range of every class."""
        out = []
        start = 0
        for size in self.class_sizes:
            out.append(range(start, start + size))
            start += size
        return out

    def labels(self) -> np.ndarray:
        """Class label (1..C) of every column."""
        return np.repeat(np.arange(1, self.n_classes + 1), self.class_sizes)


def build_block_mask_Y(partition: ClassPartition) -> np.ndarray:
    """Block-diagonal n x n mask with an all-ones block per class."""
    return scipy.linalg.block_diag(*[np.ones((k, k)) for k in partition.class_sizes])


def build_offblock_mask_A(partition: ClassPartition) -> np.ndarray:
    """Complement of the block mask: ones exactly off the class blocks."""
    return 1.0 - build_block_mask_Y(partition)


def extend_mask_Atilde(A, N: int) -> np.ndarray:
    """
    Append an all-ones block for the N - n test columns.

    Args:
        A: n x n off-block mask
        N: Total number of columns (training plus test)

    Returns:
        n x N matrix [A, 1 1^T]
    """
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise DimensionError(f"A must be square, got {A.shape}")
    if N < n:
        raise DimensionError(f"N={N} is smaller than the number of training samples {n}")
    return np.hstack([A, np.ones((n, N - n))])


def build_distance_D(X_tr, X) -> np.ndarray:
    """
    Squared Euclidean distances between training columns and all columns.

    Computed from direct differences, so coincident columns give exactly
    zero; on unit columns this equals 2 - 2 <u, v>.

    Args:
        X_tr: d x n training matrix
        X: d x N matrix of all samples

    Returns:
        n x N matrix with D_ij = ||x_tr_i - x_j||^2
    """
    X_tr = as_matrix(X_tr, "X_tr")
    X = as_matrix(X, "X")
    if X_tr.shape[0] != X.shape[0]:
        raise DimensionError(
            f"X_tr has {X_tr.shape[0]} rows but X has {X.shape[0]}"
        )
    return cdist(X_tr.T, X.T, metric="sqeuclidean")


def block_target_R(Y, Z) -> np.ndarray:
    """
    Block-diagonal part of the training columns of Z, zero on test columns.

    Args:
        Y: n x n block mask
        Z: n x N current representation

    Returns:
        [Y, 0] o Z
    """
    Y = np.asarray(Y, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    n = Y.shape[0]
    if Y.shape != (n, n) or Z.shape[0] != n or Z.shape[1] < n:
        raise DimensionError(f"incompatible shapes Y {Y.shape} and Z {Z.shape}")
    R = np.zeros_like(Z)
    R[:, :n] = Y * Z[:, :n]
    return R


def off_block_mass_ratio(Z_tr, partition: ClassPartition) -> float:
    """
    Fraction of squared Frobenius mass lying outside the class blocks.

    Raises:
        UndefinedRatioError: if Z_tr is all zeros
    """
    Z_tr = np.asarray(Z_tr, dtype=np.float64)
    n = partition.n_samples
    if Z_tr.shape != (n, n):
        raise DimensionError(f"Z_tr must be {n}x{n}, got {Z_tr.shape}")
    total = float(np.sum(Z_tr**2))
    if total == 0.0:
        raise UndefinedRatioError("off-block mass ratio is undefined for an all-zero matrix")
    off = float(np.sum((build_offblock_mask_A(partition) * Z_tr) ** 2))
    return off / total
