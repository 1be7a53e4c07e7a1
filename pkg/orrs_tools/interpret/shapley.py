"""Model-agnostic Shapley attribution under the interventional value function.

v(S) is the mean model output over the background rows with the features in S
overwritten by the explained sample. ``shapley_exact`` enumerates every
coalition and is the oracle for ``shapley_sample``, which averages marginal
contributions along random feature orderings.
"""
import logging
import math
from collections import namedtuple
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from joblib import Parallel, delayed

from orrs_tools.interpret.exceptions import ShapleyException
from orrs_tools.utils import substream


shapley_logger = logging.getLogger(__name__)

MAX_EXACT_FEATURES = 12
DEFAULT_BACKGROUND_SIZE = 256
BACKGROUND_STREAM = 11
EXACT_CHUNK_ROWS = 1 << 18

ShapleyEstimate = namedtuple('ShapleyEstimate', ('values', 'standard_errors', 'baseline', 'prediction'))
AttributionSummary = namedtuple('AttributionSummary', ('ms', 'mas', 'ranking'))


def _predictor(model):
    return model.predict if hasattr(model, "predict") else model


def _check_inputs(x, background):
    x = np.asarray(x, dtype=float).ravel()
    background = np.asarray(background, dtype=float)
    if background.ndim != 2 or not len(background):
        raise ShapleyException("Background set must be a non-empty 2-D matrix.")
    if background.shape[1] != len(x):
        raise ShapleyException("Sample has {0} features but the background has {1}".format(
            len(x), background.shape[1]
        ))
    return x, background


def shapley_sample(model, x, background, n_permutations=200, seed=0, draw_background=False):
    """Permutation-sampling estimate with per-feature standard errors.

    By default every ordering is scored against the whole background, so the
    attributions of one ordering telescope to f(x) - baseline. With
    ``draw_background`` each ordering instead imputes from one random
    background row.
    """
    x, background = _check_inputs(x, background)
    if n_permutations < 1:
        raise ShapleyException("n_permutations must be >= 1")
    f = _predictor(model)
    d = len(x)
    rng = substream(seed)
    baseline = float(np.mean(f(background)))
    contributions = np.zeros((n_permutations, d))
    for k in range(n_permutations):
        order = rng.permutation(d)
        rows = background[[rng.integers(len(background))]] if draw_background else background
        stages = np.repeat(rows[None, :, :], d + 1, axis=0)
        for step, j in enumerate(order):
            stages[step + 1:, :, j] = x[j]
        values = f(stages.reshape(-1, d)).reshape(d + 1, len(rows)).mean(axis=1)
        contributions[k, order] = np.diff(values)
    ddof = 1 if n_permutations > 1 else 0
    return ShapleyEstimate(
        contributions.mean(axis=0),
        contributions.std(axis=0, ddof=ddof) / math.sqrt(n_permutations),
        baseline,
        float(f(x[None, :])[0])
    )


def _coalition_values(f, x, background):
    d = len(x)
    masks = np.arange(1 << d)
    members = ((masks[:, None] >> np.arange(d)) & 1).astype(bool)
    values = np.empty(len(masks))
    per_chunk = max(1, EXACT_CHUNK_ROWS // len(background))
    for start in range(0, len(masks), per_chunk):
        chunk = members[start:start + per_chunk]
        block = np.where(chunk[:, None, :], x[None, None, :], background[None, :, :])
        values[start:start + len(chunk)] = f(block.reshape(-1, d)).reshape(len(chunk), -1).mean(axis=1)
    return values, members


def shapley_exact(model, x, background):
    x, background = _check_inputs(x, background)
    d = len(x)
    if d > MAX_EXACT_FEATURES:
        raise ShapleyException("Exact enumeration supports at most {0} features, got {1}".format(
            MAX_EXACT_FEATURES, d
        ))
    f = _predictor(model)
    values, members = _coalition_values(f, x, background)
    sizes = members.sum(axis=1)
    weights = np.array([math.factorial(s) * math.factorial(d - s - 1) / math.factorial(d) for s in range(d)])
    phi = np.zeros(d)
    for j in range(d):
        without = np.nonzero(~members[:, j])[0]
        phi[j] = np.sum(weights[sizes[without]] * (values[without | (1 << j)] - values[without]))
    return ShapleyEstimate(phi, np.zeros(d), float(values[0]), float(f(x[None, :])[0]))


def aggregate_ms_mas(matrix, feature_names=None):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if not matrix.size:
        raise ShapleyException("Attribution matrix is empty.")
    ms = matrix.mean(axis=0)
    mas = np.abs(matrix).mean(axis=0)
    names = list(feature_names) if feature_names is not None else [str(i) for i in range(matrix.shape[1])]
    ranking = sorted(range(len(names)), key=lambda i: (-mas[i], names[i]))
    return AttributionSummary(ms, mas, ranking)


def select_background(X, size=DEFAULT_BACKGROUND_SIZE, seed=0):
    X = np.asarray(X, dtype=float)
    if len(X) <= size:
        return X.copy()
    rows = np.sort(substream(seed, BACKGROUND_STREAM).choice(len(X), size=size, replace=False))
    return X[rows]


@dataclass
class ShapleyReport(object):
    feature_names: Tuple[str, ...]
    attributions: np.ndarray
    standard_errors: np.ndarray
    baselines: np.ndarray
    predictions: np.ndarray
    n_permutations: int
    background_size: int
    seed: int

    def summary(self):
        return aggregate_ms_mas(self.attributions, self.feature_names)

    def efficiency_residuals(self):
        return self.baselines + self.attributions.sum(axis=1) - self.predictions

    def long_rows(self, sample_ids=None):
        sample_ids = sample_ids if sample_ids is not None else range(len(self.attributions))
        for sample_id, row in zip(sample_ids, self.attributions):
            for name, value in zip(self.feature_names, row):
                yield {"sample_id": sample_id, "feature": name, "value": float(value)}

    def summary_rows(self):
        summary = self.summary()
        rank = {i: r + 1 for r, i in enumerate(summary.ranking)}
        for i in summary.ranking:
            yield {
                "feature": self.feature_names[i], "ms": float(summary.ms[i]), "mas": float(summary.mas[i]),
                "rank": rank[i]
            }


def _explain_one(model, x, background, n_permutations, seed, index):
    return shapley_sample(model, x, background, n_permutations, seed=int(substream(seed, index).integers(2 ** 31)))


def explain_samples(model, X, background, feature_names, n_permutations=200, seed=0, n_jobs=1):
    """Sampled attributions for every row of X; row i uses the stream (seed, i)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    shapley_logger.info("Explaining {0} samples against {1} background rows, {2} permutations each".format(
        len(X), len(background), n_permutations
    ))
    estimates = Parallel(n_jobs=n_jobs)(
        delayed(_explain_one)(model, x, background, n_permutations, seed, i) for i, x in enumerate(X)
    )
    return ShapleyReport(
        tuple(feature_names),
        np.vstack([e.values for e in estimates]),
        np.vstack([e.standard_errors for e in estimates]),
        np.array([e.baseline for e in estimates]),
        np.array([e.prediction for e in estimates]),
        n_permutations, len(background), seed
    )
