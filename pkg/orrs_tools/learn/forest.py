import logging
import math
import time
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from orrs_tools.learn.base import TrainReport, check_training_data, check_prediction_width, rmse, row_keys, \
    bootstrap_counts
from orrs_tools.learn.trees import grow_tree, RegressionTree, BinnedFeatures
from orrs_tools.utils import substream


forest_logger = logging.getLogger(__name__)

CLASSIFICATION_CRITERIA = {"gini", "entropy"}
BOOTSTRAP_STREAM = 1 << 20


@dataclass(frozen=True)
class ForestConfig(object):
    n_trees: int = 200
    max_depth: int = 8
    min_samples_split: int = 2
    split_criterion: str = "variance"
    bootstrap: bool = True
    max_features: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 0:
            raise ValueError("ForestConfig needs n_trees >= 1 and max_depth >= 0")
        if not 0 < self.max_features <= 1:
            raise ValueError("max_features must lie in (0, 1]")


class ForestModel(object):
    KIND = "forest"

    def __init__(self, trees, n_features, config):
        self.trees = list(trees)
        self.n_features = n_features
        self.config = config

    def __repr__(self):
        return "ForestModel(trees={0}, features={1})".format(len(self.trees), self.n_features)

    def tree_predictions(self, X):
        X = check_prediction_width(X, self.n_features, self.KIND)
        return np.vstack([tree.predict(X) for tree in self.trees])

    def predict(self, X):
        return np.mean(self.tree_predictions(X), axis=0)

    def encode_body(self):
        return {"trees": [tree.to_document() for tree in self.trees]}

    @classmethod
    def decode_body(cls, body, header, config):
        return cls([RegressionTree.from_document(t) for t in body["trees"]], header["n_features"], config)


def _grow_bagged_tree(binned, y, keys, cfg, index):
    rng = substream(cfg.seed, index)
    d = binned.codes.shape[1]
    weight = bootstrap_counts(keys, cfg.seed, BOOTSTRAP_STREAM, index) if cfg.bootstrap else None
    gain = np.zeros(d)
    max_features = max(1, int(math.ceil(cfg.max_features * d)))
    tree = grow_tree(
        None, y, cfg.max_depth, min_samples_split=cfg.min_samples_split,
        max_features=max_features if max_features < d else None, rng=rng, feature_gain=gain, weight=weight,
        binned=binned
    )
    return tree, gain


def train_forest(X, y, cfg, n_jobs=1):
    started = time.time()
    X, y = check_training_data(X, y, ForestModel.KIND)
    if cfg.split_criterion.lower() in CLASSIFICATION_CRITERIA:
        forest_logger.warning(
            "Split criterion {0!r} is a classification criterion; using variance reduction.".format(cfg.split_criterion)
        )
    binned = BinnedFeatures.build(X)
    keys = row_keys(X, y) if cfg.bootstrap else None
    grown = Parallel(n_jobs=n_jobs)(
        delayed(_grow_bagged_tree)(binned, y, keys, cfg, i) for i in range(cfg.n_trees)
    )
    trees = [tree for tree, _ in grown]
    report = TrainReport(feature_gain=np.sum([gain for _, gain in grown], axis=0))

    running = np.zeros(len(y))
    for i, tree in enumerate(trees):
        running += tree.predict(X)
        report.loss.append(rmse(y, running / (i + 1)))
    report.seconds = time.time() - started
    forest_logger.debug("Forest of {0} trees trained in {1:.2f}s, RMSE {2:.4g}".format(
        len(trees), report.seconds, report.loss[-1]
    ))
    return ForestModel(trees, X.shape[1], cfg), report


def predict_forest(model, X):
    return model.predict(X)
