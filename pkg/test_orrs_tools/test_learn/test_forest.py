import numpy as np
import pytest

from orrs_tools.learn.base import rmse
from orrs_tools.learn.exceptions import TrainingException, WidthMismatchException
from orrs_tools.learn.forest import ForestConfig, train_forest, predict_forest


@pytest.fixture
def small_config():
    return ForestConfig(n_trees=20, max_depth=5, seed=3)


def test_forest_fits(data, small_config):
    X, y = data
    model, report = train_forest(X, y, small_config)
    assert len(model.trees) == 20
    assert len(report.loss) == 20
    assert report.loss[-1] < np.std(y)
    assert rmse(y, predict_forest(model, X)) == pytest.approx(report.loss[-1])


def test_forest_is_deterministic(data, small_config):
    X, y = data
    first, _ = train_forest(X, y, small_config)
    second, _ = train_forest(X, y, small_config, n_jobs=2)
    assert np.array_equal(first.predict(X), second.predict(X))


def test_prediction_is_mean_of_trees(data, small_config):
    X, y = data
    model, _ = train_forest(X, y, small_config)
    assert np.allclose(model.predict(X[:5]), model.tree_predictions(X[:5]).mean(axis=0))


def test_classification_criterion_warns(data, caplog):
    X, y = data
    cfg = ForestConfig(n_trees=5, max_depth=3, split_criterion="gini")
    model, _ = train_forest(X, y, cfg)
    reference, _ = train_forest(X, y, ForestConfig(n_trees=5, max_depth=3))
    assert "variance reduction" in caplog.text
    assert np.array_equal(model.predict(X), reference.predict(X))


def test_constant_target(caplog):
    X = np.random.default_rng(0).normal(size=(30, 3))
    model, _ = train_forest(X, np.full(30, 4.0), ForestConfig(n_trees=3))
    assert np.all(model.predict(X) == 4.0)
    assert "Zero-variance" in caplog.text


def test_width_mismatch(data, small_config):
    X, y = data
    model, _ = train_forest(X, y, small_config)
    with pytest.raises(WidthMismatchException):
        model.predict(X[:, :2])


@pytest.mark.parametrize(
    "X,y",
    [
        (np.zeros((1, 2)), np.zeros(1)),
        (np.zeros((3, 2)), np.zeros(2)),
        (np.array([[0.0], [np.nan]]), np.zeros(2)),
    ]
)
def test_bad_training_data(X, y):
    with pytest.raises(TrainingException) as exc_info:
        train_forest(X, y, ForestConfig(n_trees=2))
    assert exc_info.value.stage == "forest"


@pytest.mark.parametrize("overrides", [{"n_trees": 0}, {"max_features": 0.0}, {"max_features": 1.5}])
def test_invalid_config(overrides):
    with pytest.raises(ValueError):
        ForestConfig(**overrides)


@pytest.mark.parametrize("bootstrap", [True, False])
def test_row_order_does_not_matter(data, bootstrap):
    X, y = data
    cfg = ForestConfig(n_trees=10, max_depth=5, max_features=0.5, bootstrap=bootstrap, seed=6)
    perm = np.random.default_rng(1).permutation(len(y))
    model, _ = train_forest(X, y, cfg)
    shuffled, _ = train_forest(X[perm], y[perm], cfg)
    assert np.allclose(model.predict(X), shuffled.predict(X), atol=1e-10)


def test_step_function_fit():
    x = np.random.default_rng(3).uniform(size=(1000, 1))
    y = (x[:, 0] > 0.5).astype(float)
    model, _ = train_forest(x, y, ForestConfig(n_trees=200, max_depth=3, seed=0))
    predicted = model.predict(x)
    assert 1.0 - np.sum((y - predicted) ** 2) / np.sum((y - y.mean()) ** 2) > 0.95
