import itertools
import logging
from collections import namedtuple
from dataclasses import replace

import numpy as np
from joblib import Parallel, delayed

from orrs_tools.learn.base import rmse
from orrs_tools.learn.exceptions import GridSearchException
from orrs_tools.utils import canonical_json, substream


search_logger = logging.getLogger(__name__)

GridScore = namedtuple('GridScore', ('params', 'mean_rmse', 'fold_rmse', 'error'))


class HyperGrid(object):
    """Cartesian product of candidate values applied on top of a base config dataclass."""

    def __init__(self, base_config, axes):
        self.base_config = base_config
        self.axes = {name: list(values) for name, values in sorted(axes.items())}
        if any(not values for values in self.axes.values()):
            raise GridSearchException("Every grid axis needs at least one value.")

    def __repr__(self):
        return "HyperGrid({0}, points={1})".format(type(self.base_config).__name__, len(self))

    def __len__(self):
        return int(np.prod([len(v) for v in self.axes.values()])) if self.axes else 1

    def points(self):
        names = list(self.axes)
        for combo in itertools.product(*(self.axes[n] for n in names)):
            yield dict(zip(names, combo))

    def candidates(self):
        for params in self.points():
            yield params, replace(self.base_config, **params)


def fold_indices(n, k, seed, groups=None):
    """k test-index arrays; rows sharing a group label always land in the same fold."""
    if groups is None:
        groups = np.arange(n)
    labels = sorted(set(groups))
    if k < 2 or len(labels) < k:
        raise GridSearchException("Need k >= 2 and at least k groups, got k={0}, groups={1}".format(k, len(labels)))
    order = substream(seed).permutation(len(labels))
    fold_of = {labels[j]: position % k for position, j in enumerate(order)}
    assignment = np.array([fold_of[g] for g in groups])
    return [np.nonzero(assignment == f)[0] for f in range(k)]


def _score_candidate(params, cfg, trainer, X, y, folds):
    fold_rmse = []
    try:
        for test in folds:
            train = np.setdiff1d(np.arange(len(y)), test)
            model, _ = trainer(X[train], y[train], cfg)
            fold_rmse.append(rmse(y[test], model.predict(X[test])))
    except Exception as e:
        search_logger.warning("Grid point {0} failed: {1}".format(params, e))
        return GridScore(params, None, fold_rmse, str(e))
    return GridScore(params, float(np.mean(fold_rmse)), fold_rmse, None)


def grid_search(grid, trainer, X, y, k=5, seed=0, n_jobs=1, groups=None):
    """Scores every grid point by k-fold mean RMSE; returns (best config, score table)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    folds = fold_indices(len(y), k, seed, groups)
    candidates = list(grid.candidates())
    table = Parallel(n_jobs=n_jobs)(
        delayed(_score_candidate)(params, cfg, trainer, X, y, folds) for params, cfg in candidates
    )
    scored = [(row.mean_rmse, canonical_json(row.params), cfg) for row, (_, cfg) in zip(table, candidates)
              if row.error is None]
    if not scored:
        raise GridSearchException("All {0} grid points failed to train.".format(len(table)), table)
    best = min(scored, key=lambda s: (s[0], s[1]))
    search_logger.info("Grid search over {0} points: best {1} with RMSE {2:.4g}".format(len(table), best[1], best[0]))
    return best[2], table
