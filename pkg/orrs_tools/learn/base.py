import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np
import pandas as pd
from scipy.stats import poisson

from orrs_tools.learn.exceptions import TrainingException, WidthMismatchException
from orrs_tools.utils import substream


learn_logger = logging.getLogger(__name__)


@dataclass
class TrainReport(object):
    loss: List[float] = field(default_factory=list)
    feature_gain: np.ndarray = None
    pruned: List[int] = field(default_factory=list)
    seconds: float = 0.0

    def gain_share(self):
        if self.feature_gain is None:
            return None
        total = float(np.sum(self.feature_gain))
        if total <= 0:
            return np.zeros_like(self.feature_gain)
        return self.feature_gain / total


def rmse(y, predicted):
    y = np.asarray(y, dtype=float)
    return float(np.sqrt(np.mean((np.asarray(predicted, dtype=float) - y) ** 2)))


def check_training_data(X, y, stage):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1:
        raise TrainingException("X must be 2-D and y 1-D, got {0} and {1}".format(X.shape, y.shape), stage)
    if len(X) != len(y):
        raise TrainingException("X has {0} rows but y has {1}".format(len(X), len(y)), stage)
    if len(y) < 2:
        raise TrainingException("At least 2 rows are required, got {0}".format(len(y)), stage)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise TrainingException("Non-finite values in training data.", stage)
    if np.ptp(y) == 0:
        learn_logger.warning("[{0}] Zero-variance target; the fitted model is constant {1}.".format(stage, y[0]))
    return X, y


def check_prediction_width(X, n_features, kind):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and len(X) == 0:
        X = X.reshape(0, n_features)
    if X.ndim != 2 or X.shape[1] != n_features:
        raise WidthMismatchException("{0} model expects {1} features, got shape {2}".format(
            kind, n_features, X.shape
        ))
    return X


def row_keys(X, y):
    """Content hash of every (x, y) row; equal rows share a key wherever they sit."""
    table = pd.DataFrame(np.column_stack([np.asarray(X, dtype=float), np.asarray(y, dtype=float)]))
    return pd.util.hash_pandas_object(table, index=False).to_numpy(dtype=np.uint64)


def keyed_uniforms(keys, seed, *stream):
    """One uniform in (0, 1) per key, fixed by (seed, stream, key) and independent of row order."""
    salt = substream(seed, *stream).integers(0, 1 << 63, dtype=np.uint64)
    z = np.asarray(keys, dtype=np.uint64) ^ salt
    # splitmix64 finalizer
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return ((z >> np.uint64(11)).astype(float) + 0.5) / float(1 << 53)


def bootstrap_counts(keys, seed, *stream):
    """Poisson(1) draw counts per row, the order-free form of sampling n rows with replacement."""
    return poisson.ppf(keyed_uniforms(keys, seed, *stream), 1.0)
