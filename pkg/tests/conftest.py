"""Shared builders for the test suite."""

import numpy as np
import pytest

from convexlda import Dataset, SyntheticSpec, synth_gaussian


def random_dataset(rng, d=None, M=None, n=None, spread=1.0):
    """Small random labeled dataset with at least two samples per class."""
    d = d if d is not None else int(rng.integers(2, 12))
    M = M if M is not None else int(rng.integers(2, 5))
    n = n if n is not None else int(rng.integers(M * 2, 40))
    labels = np.concatenate([np.tile(np.arange(M), 2), rng.integers(0, M, n - 2 * M)])
    rng.shuffle(labels)
    means = rng.uniform(-5.0, 5.0, (d, M))
    X = means[:, labels] + spread * rng.standard_normal((d, n))
    return Dataset(X=X, labels=labels)


def toy_dataset(class_std, seed, n_classes=5, dim=100, n_total=100):
    """Isotropic Gaussian blobs with uniformly drawn class means."""
    return synth_gaussian(
        SyntheticSpec(
            n_classes=n_classes,
            dim=dim,
            n_total=n_total,
            class_std=class_std,
            seed=seed,
        )
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
