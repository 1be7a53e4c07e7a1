import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from orrs_tools.learn.base import TrainReport, check_training_data, check_prediction_width, rmse, row_keys, \
    keyed_uniforms
from orrs_tools.learn.trees import grow_tree, RegressionTree, BinnedFeatures
from orrs_tools.utils import substream


gbt_logger = logging.getLogger(__name__)

SUBSAMPLE_STREAM = 1 << 20


@dataclass(frozen=True)
class GbtConfig(object):
    n_rounds: int = 300
    max_depth: int = 6
    min_child_weight: int = 1
    subsample: float = 0.8
    colsample: float = 0.8
    learning_rate: float = 0.1
    lambda_l2: float = 1.0
    gain_prune_threshold: float = 0.01
    refit_pruned: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_rounds < 0 or self.max_depth < 0 or self.min_child_weight < 1:
            raise ValueError("GbtConfig needs n_rounds >= 0, max_depth >= 0 and min_child_weight >= 1")
        if not (0 < self.subsample <= 1 and 0 < self.colsample <= 1):
            raise ValueError("subsample and colsample must lie in (0, 1]")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.lambda_l2 < 0:
            raise ValueError("lambda_l2 must be >= 0")


class GbtModel(object):
    """Additive tree model: base + learning_rate * sum(tree(x))."""

    KIND = "gbt"

    def __init__(self, base, trees, n_features, config, pruned=()):
        self.base = float(base)
        self.trees = list(trees)
        self.n_features = n_features
        self.config = config
        self.pruned = tuple(pruned)

    def __repr__(self):
        return "GbtModel(rounds={0}, features={1}, pruned={2})".format(
            len(self.trees), self.n_features, list(self.pruned)
        )

    def staged_predict(self, X):
        X = check_prediction_width(X, self.n_features, self.KIND)
        predicted = np.full(len(X), self.base)
        for tree in self.trees:
            predicted = predicted + self.config.learning_rate * tree.predict(X)
            yield predicted

    def predict(self, X):
        X = check_prediction_width(X, self.n_features, self.KIND)
        predicted = np.full(len(X), self.base)
        for tree in self.trees:
            predicted = predicted + self.config.learning_rate * tree.predict(X)
        return predicted

    def encode_body(self):
        return {"base": self.base, "pruned": list(self.pruned), "trees": [t.to_document() for t in self.trees]}

    @classmethod
    def decode_body(cls, body, header, config):
        return cls(
            body["base"], [RegressionTree.from_document(t) for t in body["trees"]], header["n_features"], config,
            body.get("pruned", ())
        )


def pruned_features(feature_gain, threshold):
    """Indices whose share of total split gain is <= threshold; nothing is pruned when no gain was recorded."""
    feature_gain = np.asarray(feature_gain, dtype=float)
    if float(feature_gain.sum()) <= 0:
        return []
    share = TrainReport(feature_gain=feature_gain).gain_share()
    return [int(i) for i in np.nonzero(share <= threshold)[0]]


def _boost(X, y, cfg, allowed, binned, keys):
    n = len(y)
    allowed = np.asarray(allowed)
    base = float(np.mean(y))
    predicted = np.full(n, base)
    gain = np.zeros(X.shape[1])
    report = TrainReport(feature_gain=gain)
    trees = []
    n_cols = max(1, int(math.ceil(cfg.colsample * len(allowed))))
    for round_index in range(cfg.n_rounds):
        rng = substream(cfg.seed, round_index)
        weight = None
        if cfg.subsample < 1:
            weight = (keyed_uniforms(keys, cfg.seed, SUBSAMPLE_STREAM, round_index) < cfg.subsample).astype(float)
        columns = np.sort(rng.choice(allowed, size=n_cols, replace=False)) if n_cols < len(allowed) else allowed
        residual = y - predicted
        tree = grow_tree(
            X, residual, cfg.max_depth, min_child=cfg.min_child_weight, lambda_l2=cfg.lambda_l2,
            allowed_features=columns, feature_gain=gain, weight=weight, binned=binned
        )
        trees.append(tree)
        predicted = predicted + cfg.learning_rate * tree.predict(X)
        report.loss.append(rmse(y, predicted))
    return base, trees, report


def train_gbt(X, y, cfg):
    started = time.time()
    X, y = check_training_data(X, y, GbtModel.KIND)
    d = X.shape[1]
    binned = BinnedFeatures.build(X)
    keys = row_keys(X, y) if cfg.subsample < 1 else None
    base, trees, report = _boost(X, y, cfg, np.arange(d), binned, keys)
    report.pruned = pruned_features(report.feature_gain, cfg.gain_prune_threshold)
    if report.pruned:
        gbt_logger.info("Gain share <= {0} for features {1}".format(cfg.gain_prune_threshold, report.pruned))
    if cfg.refit_pruned and report.pruned and len(report.pruned) < d:
        kept = [i for i in range(d) if i not in set(report.pruned)]
        gbt_logger.info("Refitting without {0} pruned features".format(len(report.pruned)))
        pruned = report.pruned
        base, trees, report = _boost(X, y, cfg, kept, binned, keys)
        report.pruned = pruned
    report.seconds = time.time() - started
    gbt_logger.debug("GBT of {0} rounds trained in {1:.2f}s".format(len(trees), report.seconds))
    return GbtModel(base, trees, d, cfg, report.pruned), report


def predict_gbt(model, X):
    return model.predict(X)
