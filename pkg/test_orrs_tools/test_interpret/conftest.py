import numpy as np
import pytest

from orrs_tools.learn.gbt import GbtConfig, train_gbt


WEIGHTS = np.array([2.0, 1.0, -1.0, 0.5, 0.0, 0.0, 0.0, 0.0])


def additive_model(X):
    return np.asarray(X, dtype=float) @ WEIGHTS


def product_model(X):
    X = np.asarray(X, dtype=float)
    return X[:, 0] * X[:, 1]


@pytest.fixture(scope="module")
def gbt_data():
    rng = np.random.default_rng(17)
    X = rng.normal(size=(600, 8))
    X[:, 4:] = 0.0
    y = X @ WEIGHTS + 0.3 * X[:, 0] * X[:, 1] + rng.normal(scale=0.05, size=600)
    return X, y


@pytest.fixture(scope="module")
def gbt_model(gbt_data):
    X, y = gbt_data
    model, _ = train_gbt(X, y, GbtConfig(n_rounds=60, max_depth=3, subsample=1.0, colsample=1.0, seed=3))
    return model


@pytest.fixture
def background(gbt_data):
    return gbt_data[0][:64]
