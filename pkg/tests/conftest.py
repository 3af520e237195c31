import numpy as np
import pytest

from bdlrr.data import GeneratorConfig, synth_union_of_subspaces
from bdlrr.structure import ClassPartition


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def partition():
    return ClassPartition(class_sizes=(2, 3, 1))


@pytest.fixture(scope="session")
def benchmark_config():
    """Five 10-dimensional subspaces in R^50, 20 + 20 samples per class."""
    return GeneratorConfig()


@pytest.fixture(scope="session")
def benchmark(benchmark_config):
    return synth_union_of_subspaces(benchmark_config).dataset


@pytest.fixture(scope="session")
def small_config():
    return GeneratorConfig(
        classes=3, subspace_dim=3, ambient_dim=20, n_train_per_class=6, n_test_per_class=4, seed=3
    )


@pytest.fixture
def small_dataset(small_config):
    return synth_union_of_subspaces(small_config).dataset
