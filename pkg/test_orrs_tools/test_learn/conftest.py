import numpy as np
import pytest


def regression_data(seed, n=200, d=4, noise=0.1):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = 2.0 * X[:, 0] - X[:, 1] + 0.5 * X[:, 0] * X[:, 2] + noise * rng.normal(size=n)
    return X, y


@pytest.fixture
def data():
    return regression_data(0)


@pytest.fixture
def positive_data():
    X, y = regression_data(1)
    return X, y - y.min() + 0.5
