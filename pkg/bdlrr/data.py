"""
Data harness: matrix and label files, column normalization, dataset
assembly and the synthetic union-of-subspaces generator.

Matrix file format: line 1 holds ``rows cols``, followed by ``rows``
lines of ``cols`` whitespace-separated numbers; lines starting with
``#`` are comments. Label files hold one integer (1..C) per line.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field, model_validator

from bdlrr.errors import DimensionError, ParseError
from bdlrr.prox import as_matrix
from bdlrr.structure import ClassPartition

logger = logging.getLogger(__name__)

MATRIX_FILES = {
    "X_tr": "X_tr.txt",
    "X_tt": "X_tt.txt",
    "train_labels": "train_labels.txt",
    "test_labels": "test_labels.txt",
    "manifest": "manifest.txt",
}


# ---------- Matrix and label files ----------


def _content_lines(path: Path):
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def load_matrix(path: str | Path) -> np.ndarray:
    """
    Read a matrix file.

    Raises:
        ParseError: on a malformed header, ragged row, non-numeric or
            non-finite token, or a row count that does not match the header
    """
    path = Path(path)
    lines = _content_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise ParseError(path, 1, "missing 'rows cols' header") from None

    parts = header.split()
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise ParseError(path, lineno, f"header must be two integers 'rows cols', got {header!r}")
    rows, cols = int(parts[0]), int(parts[1])
    if rows < 1 or cols < 1:
        raise ParseError(path, lineno, f"matrix must be at least 1x1, got {rows}x{cols}")

    M = np.empty((rows, cols))
    i = 0
    for lineno, line in lines:
        if i >= rows:
            raise ParseError(path, lineno, f"more than {rows} rows")
        tokens = line.split()
        if len(tokens) != cols:
            raise ParseError(path, lineno, f"expected {cols} values, got {len(tokens)}")
        try:
            M[i] = [float(t) for t in tokens]
        except ValueError as e:
            raise ParseError(path, lineno, f"non-numeric token: {e}") from None
        if not np.all(np.isfinite(M[i])):
            raise ParseError(path, lineno, "non-finite value (nan or inf)")
        i += 1
    if i != rows:
        raise ParseError(path, lineno, f"expected {rows} rows, got {i}")
    return M


def save_matrix(M, path: str | Path) -> None:
    """Write a matrix with 17 significant digits so doubles round-trip exactly."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, None]
    lines = [f"{M.shape[0]} {M.shape[1]}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in M]
    Path(path).write_text("\n".join(lines) + "\n")


def load_labels(path: str | Path) -> np.ndarray:
    """Read one integer label per line."""
    path = Path(path)
    labels = []
    for lineno, line in _content_lines(path):
        try:
            labels.append(int(line))
        except ValueError:
            raise ParseError(path, lineno, f"expected an integer label, got {line!r}") from None
    return np.asarray(labels, dtype=np.int64)


def save_labels(labels, path: str | Path) -> None:
    Path(path).write_text("".join(f"{int(v)}\n" for v in labels))


# ---------- Normalization and assembly ----------


def normalize_columns(M) -> tuple[np.ndarray, list[int]]:
    """
    Scale every nonzero column to unit Euclidean norm.

    Returns:
        (normalized matrix, indices of zero columns left unchanged)
    """
    M = as_matrix(M, "M")
    norms = np.linalg.norm(M, axis=0)
    zero_cols = [int(j) for j in np.flatnonzero(norms == 0)]
    for j in zero_cols:
        logger.warning(f"column {j} is all zeros and was left unnormalized")
    safe = np.where(norms == 0, 1.0, norms)
    return M / safe, zero_cols


@dataclass(frozen=True)
class PartitionedDataset:
    """
    Class-sorted, normalized training and test data.

    ``permutation[k]`` is the original index of sorted training column k.
    """

    X_tr: np.ndarray
    X_tt: np.ndarray
    train_labels: np.ndarray
    test_labels: np.ndarray
    partition: ClassPartition
    permutation: np.ndarray
    zero_columns: tuple[int, ...] = ()

    @property
    def X(self) -> np.ndarray:
        """All samples [X_tr, X_tt]."""
        return np.hstack([self.X_tr, self.X_tt])

    @property
    def n_classes(self) -> int:
        return self.partition.n_classes

    def restore_order(self, values) -> np.ndarray:
        """Map per-training-column values from sorted back to original order."""
        values = np.asarray(values)
        out = np.empty_like(values)
        out[self.permutation] = values
        return out


def assemble_dataset(X_tr, train_labels, X_tt, test_labels) -> PartitionedDataset:
    """
    Sort training columns by class and normalize all columns.

    Sorting is stable, so samples keep their relative order within a class.
    Zero columns are reported with indices into [X_tr_sorted, X_tt].
    """
    X_tr = as_matrix(X_tr, "X_tr")
    X_tt = as_matrix(X_tt, "X_tt")
    train_labels = np.asarray(train_labels, dtype=np.int64)
    test_labels = np.asarray(test_labels, dtype=np.int64)
    if X_tr.shape[0] != X_tt.shape[0]:
        raise DimensionError(f"X_tr has {X_tr.shape[0]} rows, X_tt has {X_tt.shape[0]}")
    if train_labels.size != X_tr.shape[1]:
        raise DimensionError(f"{train_labels.size} training labels for {X_tr.shape[1]} columns")
    if test_labels.size != X_tt.shape[1]:
        raise DimensionError(f"{test_labels.size} test labels for {X_tt.shape[1]} columns")

    order = np.argsort(train_labels, kind="stable")
    sorted_labels = train_labels[order]
    partition = ClassPartition.from_labels(sorted_labels)
    if np.any((test_labels < 1) | (test_labels > partition.n_classes)):
        raise ValueError(f"test labels must lie in 1..{partition.n_classes}")

    X_all, zero_cols = normalize_columns(np.hstack([X_tr[:, order], X_tt]))
    n = X_tr.shape[1]
    return PartitionedDataset(
        X_tr=X_all[:, :n],
        X_tt=X_all[:, n:],
        train_labels=sorted_labels,
        test_labels=test_labels,
        partition=partition,
        permutation=order,
        zero_columns=tuple(zero_cols),
    )


def load_dataset(directory: str | Path) -> PartitionedDataset:
    """Read X_tr.txt, X_tt.txt and the two label files from a directory."""
    directory = Path(directory)
    return assemble_dataset(
        load_matrix(directory / MATRIX_FILES["X_tr"]),
        load_labels(directory / MATRIX_FILES["train_labels"]),
        load_matrix(directory / MATRIX_FILES["X_tt"]),
        load_labels(directory / MATRIX_FILES["test_labels"]),
    )


def save_dataset(dataset: PartitionedDataset, directory: str | Path, manifest: dict | None = None) -> None:
    """Write a dataset directory readable by load_dataset."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_matrix(dataset.X_tr, directory / MATRIX_FILES["X_tr"])
    save_matrix(dataset.X_tt, directory / MATRIX_FILES["X_tt"])
    save_labels(dataset.train_labels, directory / MATRIX_FILES["train_labels"])
    save_labels(dataset.test_labels, directory / MATRIX_FILES["test_labels"])
    if manifest is not None:
        (directory / MATRIX_FILES["manifest"]).write_text(
            "".join(f"{key}={value}\n" for key, value in manifest.items())
        )


# ---------- Synthetic union of subspaces ----------


class GeneratorConfig(BaseModel):
    """Parameters of the synthetic union-of-subspaces generator."""

    model_config = ConfigDict(frozen=True)

    classes: int = Field(default=5, ge=1, description="Number of classes / subspaces")
    subspace_dim: int = Field(default=10, ge=1, description="Dimension of each class subspace")
    ambient_dim: int = Field(default=50, ge=2, description="Ambient dimension d")
    n_train_per_class: int = Field(default=20, ge=1, description="Training samples per class")
    n_test_per_class: int = Field(default=20, ge=1, description="Test samples per class")
    noise_std: float = Field(default=0.05, ge=0, description="Std of isotropic Gaussian noise")
    seed: int = Field(default=7, ge=0, description="Seed of the PCG64 generator")

    @model_validator(mode="after")
    def _check_dims(self) -> "GeneratorConfig":
        if self.subspace_dim >= self.ambient_dim:
            raise ValueError(
                f"subspace_dim ({self.subspace_dim}) must be smaller than ambient_dim ({self.ambient_dim})"
            )
        return self


@dataclass(frozen=True)
class SyntheticDataset:
    """Generated dataset plus the class bases it was drawn from."""

    dataset: PartitionedDataset
    bases: tuple[np.ndarray, ...]


def synth_union_of_subspaces(config: GeneratorConfig) -> SyntheticDataset:
    """
    Draw samples from a union of random linear subspaces.

    For each class a random orthonormal basis (QR of a Gaussian matrix) is
    drawn, coefficients are standard normal, isotropic Gaussian noise is
    added and all columns are normalized. The first n_train_per_class
    samples of each class go to training. Uses numpy's PCG64 generator
    (``numpy.random.default_rng(seed)``), so a seed fixes the output.
    """
    rng = np.random.default_rng(config.seed)
    per_class = config.n_train_per_class + config.n_test_per_class
    bases, train_blocks, test_blocks = [], [], []
    for _ in range(config.classes):
        basis, _ = np.linalg.qr(rng.standard_normal((config.ambient_dim, config.subspace_dim)))
        samples = basis @ rng.standard_normal((config.subspace_dim, per_class))
        if config.noise_std > 0:
            samples = samples + config.noise_std * rng.standard_normal(samples.shape)
        bases.append(basis)
        train_blocks.append(samples[:, : config.n_train_per_class])
        test_blocks.append(samples[:, config.n_train_per_class :])

    labels = np.arange(1, config.classes + 1)
    dataset = assemble_dataset(
        np.hstack(train_blocks),
        np.repeat(labels, config.n_train_per_class),
        np.hstack(test_blocks),
        np.repeat(labels, config.n_test_per_class),
    )
    logger.debug(
        f"generated {config.classes} classes in R^{config.ambient_dim} "
        f"(dim {config.subspace_dim}, noise {config.noise_std}, seed {config.seed})"
    )
    return SyntheticDataset(dataset=dataset, bases=tuple(bases))


def resplit(dataset: PartitionedDataset, seed: int) -> PartitionedDataset:
    """
    Draw a new random train/test split with the same per-class counts.

    Training and test samples of each class are pooled and reshuffled.
    """
    rng = np.random.default_rng(seed)
    X_all = dataset.X
    labels_all = np.concatenate([dataset.train_labels, dataset.test_labels])
    train_idx, test_idx = [], []
    for c, n_train in enumerate(dataset.partition.class_sizes, start=1):
        members = rng.permutation(np.flatnonzero(labels_all == c))
        train_idx.append(members[:n_train])
        test_idx.append(members[n_train:])
    train_idx = np.concatenate(train_idx)
    test_idx = np.concatenate(test_idx)
    return assemble_dataset(
        X_all[:, train_idx], labels_all[train_idx], X_all[:, test_idx], labels_all[test_idx]
    )


def principal_angles(B1, B2) -> np.ndarray:
    """Principal angles (radians) between the column spaces of B1 and B2."""
    return scipy.linalg.subspace_angles(as_matrix(B1, "B1"), as_matrix(B2, "B2"))


def accuracy(predicted, truth) -> float:
    """Fraction of exact label matches."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise DimensionError(f"{predicted.size} predictions for {truth.size} labels")
    if truth.size == 0:
        raise ValueError("accuracy needs at least one label")
    return float(np.mean(predicted == truth))
