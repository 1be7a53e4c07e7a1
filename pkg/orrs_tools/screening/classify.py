import logging
from collections import OrderedDict, namedtuple
from enum import Enum

import numpy as np

from orrs_tools.data.records import POLLUTANTS
from orrs_tools.screening.curves import ThresholdPair
from orrs_tools.screening.exceptions import ScreeningException


classify_logger = logging.getLogger(__name__)

POLICY_FORMAT_VERSION = 1


class ScreeningClass(str, Enum):
    FREE_IM = "FreeIM"
    REGULAR = "Regular"
    RE_IM = "ReIM"


FleetClassification = namedtuple('FleetClassification', ('classes', 'proportions'))


def classify_vehicle(predictions, thresholds):
    """ReIM if ANY pollutant exceeds its Re threshold; FreeIM iff ALL are below their Free thresholds."""
    for p in POLLUTANTS:
        re = thresholds[p].re_threshold
        if re is not None and predictions[p] > re:
            return ScreeningClass.RE_IM
    for p in POLLUTANTS:
        free = thresholds[p].free_threshold
        if free is None or not predictions[p] < free:
            return ScreeningClass.REGULAR
    return ScreeningClass.FREE_IM


def classify_fleet(predictions, thresholds):
    missing = [p for p in POLLUTANTS if p not in thresholds or p not in predictions]
    if missing:
        raise ScreeningException("Predictions and thresholds are needed for {0}".format(missing))
    n = len(predictions[POLLUTANTS[0]])
    classes = [classify_vehicle({p: predictions[p][i] for p in POLLUTANTS}, thresholds) for i in range(n)]
    counts = OrderedDict((c, 0) for c in ScreeningClass)
    for c in classes:
        counts[c] += 1
    proportions = OrderedDict((c.value, counts[c] / float(n) if n else 0.0) for c in ScreeningClass)
    classify_logger.info("Classified {0} vehicles: {1}".format(
        n, ", ".join("{0} {1:.2%}".format(k, v) for k, v in proportions.items())
    ))
    return FleetClassification(classes, proportions)


def aggregate_by_vin(vins, predictions):
    """Mean prediction per vehicle: (sorted VINs, {pollutant: vector})."""
    vins = np.asarray(vins)
    unique, inverse = np.unique(vins, return_inverse=True)
    counts = np.bincount(inverse)
    return list(unique), {
        p: np.bincount(inverse, weights=np.asarray(v, dtype=float)) / counts for p, v in predictions.items()
    }


def thresholds_to_document(thresholds, provenance=None):
    return {
        "format_version": POLICY_FORMAT_VERSION,
        "thresholds": [
            {"pollutant": p, "free": thresholds[p].free_threshold, "re": thresholds[p].re_threshold}
            for p in POLLUTANTS
        ],
        "provenance": dict(provenance or {}),
    }


def thresholds_from_document(doc):
    if doc.get("format_version") != POLICY_FORMAT_VERSION:
        raise ScreeningException("Unsupported threshold policy version: {0}".format(doc.get("format_version")))
    thresholds = {e["pollutant"]: ThresholdPair(e["pollutant"], e["free"], e["re"]) for e in doc["thresholds"]}
    missing = [p for p in POLLUTANTS if p not in thresholds]
    if missing:
        raise ScreeningException("Threshold policy lacks pollutants: {0}".format(missing))
    return thresholds
