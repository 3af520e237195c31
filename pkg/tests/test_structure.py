import numpy as np
import pytest
from pydantic import ValidationError

from bdlrr.errors import DimensionError, UndefinedRatioError
from bdlrr.structure import (
    ClassPartition,
    block_target_R,
    build_block_mask_Y,
    build_distance_D,
    build_offblock_mask_A,
    extend_mask_Atilde,
    off_block_mass_ratio,
)


def test_partition_from_labels():
    p = ClassPartition.from_labels([1, 1, 2, 2, 2, 3])
    assert p.class_sizes == (2, 3, 1)
    assert p.n_classes == 3
    assert p.n_samples == 6
    assert p.ranges() == [range(0, 2), range(2, 5), range(5, 6)]
    np.testing.assert_array_equal(p.labels(), [1, 1, 2, 2, 2, 3])


@pytest.mark.parametrize("labels", [[2, 1], [1, 3, 3], [0, 1], []])
def test_partition_rejects_bad_labels(labels):
    with pytest.raises(ValueError):
        ClassPartition.from_labels(labels)


def test_partition_rejects_empty_class():
    with pytest.raises(ValidationError):
        ClassPartition(class_sizes=(2, 0))
    with pytest.raises(ValidationError):
        ClassPartition(class_sizes=())


def test_block_mask(partition):
    Y = build_block_mask_Y(partition)
    expected = np.zeros((6, 6))
    expected[0:2, 0:2] = 1
    expected[2:5, 2:5] = 1
    expected[5, 5] = 1
    np.testing.assert_array_equal(Y, expected)
    np.testing.assert_array_equal(build_offblock_mask_A(partition), 1 - expected)


def test_single_class_has_empty_offblock_mask():
    A = build_offblock_mask_A(ClassPartition(class_sizes=(4,)))
    np.testing.assert_array_equal(A, np.zeros((4, 4)))


def test_extended_mask(partition):
    A = build_offblock_mask_A(partition)
    At = extend_mask_Atilde(A, 9)
    assert At.shape == (6, 9)
    np.testing.assert_array_equal(At[:, :6], A)
    np.testing.assert_array_equal(At[:, 6:], 1.0)
    np.testing.assert_array_equal(extend_mask_Atilde(A, 6), A)
    with pytest.raises(DimensionError):
        extend_mask_Atilde(A, 5)


def test_distance_matrix(rng):
    X_tr = rng.standard_normal((5, 4))
    X_tr /= np.linalg.norm(X_tr, axis=0)
    X = np.hstack([X_tr, rng.standard_normal((5, 2))])
    D = build_distance_D(X_tr, X)
    assert D.shape == (4, 6)
    np.testing.assert_array_equal(np.diag(D[:, :4]), 0.0)
    assert np.all(D >= 0)
    np.testing.assert_allclose(D[:, :4], 2 - 2 * X_tr.T @ X_tr, atol=1e-12)
    with pytest.raises(DimensionError):
        build_distance_D(X_tr, np.ones((4, 2)))


def test_block_target(partition, rng):
    Y = build_block_mask_Y(partition)
    Z = rng.standard_normal((6, 8))
    R = block_target_R(Y, Z)
    np.testing.assert_array_equal(R[:, :6], Y * Z[:, :6])
    np.testing.assert_array_equal(R[:, 6:], 0.0)


def test_off_block_ratio(partition, rng):
    Y = build_block_mask_Y(partition)
    assert off_block_mass_ratio(Y * rng.standard_normal((6, 6)), partition) == 0.0
    assert off_block_mass_ratio(1 - Y, partition) == 1.0
    ratio = off_block_mass_ratio(np.ones((6, 6)), partition)
    assert ratio == pytest.approx(22 / 36)
    with pytest.raises(UndefinedRatioError):
        off_block_mass_ratio(np.zeros((6, 6)), partition)


def test_off_block_ratio_of_all_ones():
    two_and_one = ClassPartition(class_sizes=(2, 1))
    assert off_block_mass_ratio(np.ones((3, 3)), two_and_one) == pytest.approx(4 / 9)
