import numpy as np
import pytest

from advlabel.core import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def breast_cancer():
    sklearn = pytest.importorskip("sklearn.datasets")
    bunch = sklearn.load_breast_cancer()
    # malignant (target 0) is the positive class
    return Dataset(bunch.data, 1.0 - bunch.target, np.arange(len(bunch.target)),
                   list(bunch.feature_names))


@pytest.fixture(scope="session")
def bc_features():
    return [0, 10, 20]  # mean radius, radius error, worst radius


def two_gaussians(n, rng, shift=1.0, d=1):
    y = (rng.random(n) < 0.5).astype(float)
    X = rng.normal(size=(n, d))
    X[:, 0] += shift * (2 * y - 1)
    return Dataset(X, y)
