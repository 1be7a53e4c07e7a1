import logging
import math

import numpy as np

from orrs_tools.ensemble.exceptions import CvPlanException
from orrs_tools.utils import substream


cv_logger = logging.getLogger(__name__)

HOLDOUT_STREAM = 7


def _vin_of(item):
    return item if isinstance(item, str) else item.vin


class CvPlan(object):
    """Vehicle-level fold assignment: every record of a VIN shares one fold."""

    def __init__(self, k, seed, fold_of):
        self.k = k
        self.seed = seed
        self.fold_of = dict(fold_of)

    def __repr__(self):
        return "CvPlan(k={0}, vins={1}, seed={2})".format(self.k, len(self.fold_of), self.seed)

    @property
    def vins(self):
        return sorted(self.fold_of)

    def fold_sizes(self):
        sizes = [0] * self.k
        for fold in self.fold_of.values():
            sizes[fold] += 1
        return sizes

    def vins_in_fold(self, fold):
        return {vin for vin, f in self.fold_of.items() if f == fold}

    def assign(self, vins):
        try:
            return np.array([self.fold_of[v] for v in vins], dtype=int)
        except KeyError as e:
            raise CvPlanException("VIN {0} is not part of this plan.".format(e))

    def split(self, vins):
        """Yields (fold, train_index, test_index) over a row-aligned VIN sequence."""
        assignment = self.assign(vins)
        for fold in range(self.k):
            yield fold, np.nonzero(assignment != fold)[0], np.nonzero(assignment == fold)[0]

    def to_document(self):
        return {"k": self.k, "seed": self.seed, "fold_of": dict(sorted(self.fold_of.items()))}


def make_cv_plan(samples, k=10, seed=0):
    vins = sorted({_vin_of(s) for s in samples})
    if k < 2:
        raise CvPlanException("k must be >= 2, got {0}".format(k))
    if len(vins) < k:
        raise CvPlanException("{0} distinct VINs can not fill {1} folds.".format(len(vins), k))
    order = substream(seed).permutation(len(vins))
    plan = CvPlan(k, seed, {vins[j]: position % k for position, j in enumerate(order)})
    cv_logger.debug("CV plan with fold sizes {0}".format(plan.fold_sizes()))
    return plan


def holdout_split(samples, fraction=0.1, seed=0):
    """VIN-grouped (train_index, test_index) with round(fraction * n_vins) test vehicles, at least one each side."""
    row_vins = [_vin_of(s) for s in samples]
    vins = sorted(set(row_vins))
    if not 0 < fraction < 1 or len(vins) < 2:
        raise CvPlanException("Holdout needs 0 < fraction < 1 and at least 2 VINs.")
    n_test = min(max(1, int(math.floor(fraction * len(vins) + 0.5))), len(vins) - 1)
    order = substream(seed, HOLDOUT_STREAM).permutation(len(vins))
    test_vins = {vins[j] for j in order[:n_test]}
    is_test = np.array([v in test_vins for v in row_vins], dtype=bool)
    cv_logger.info("Held out {0} of {1} vehicles ({2} records) for final testing".format(
        n_test, len(vins), int(is_test.sum())
    ))
    return np.nonzero(~is_test)[0], np.nonzero(is_test)[0]
