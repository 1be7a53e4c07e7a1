import logging
from collections import namedtuple

import numpy as np

from orrs_tools.ensemble.exceptions import MetricsException


metrics_logger = logging.getLogger(__name__)

Metrics = namedtuple('Metrics', ('r2', 'rmse', 'slope', 'intercept', 'n'))
BinnedMetrics = namedtuple('BinnedMetrics', ('feature', 'bin_index', 'lower', 'upper', 'metrics'))

METRICS_COLUMNS = ("pollutant", "model", "r2", "rmse", "slope", "intercept", "n")
DEFAULT_BINNED_FEATURES = ("wheel_base", "torsion", "fuel_tank_capacity", "maximum_horsepower")


def compute_metrics(predicted, observed):
    """RMSE plus slope, intercept and R^2 of the least-squares line of predicted on observed."""
    predicted = np.asarray(predicted, dtype=float)
    observed = np.asarray(observed, dtype=float)
    if predicted.shape != observed.shape or predicted.ndim != 1:
        raise MetricsException("Length mismatch: {0} predicted vs {1} observed".format(
            predicted.shape, observed.shape
        ))
    n = len(observed)
    if n < 2:
        raise MetricsException("At least 2 points are required, got {0}".format(n))
    if np.ptp(observed) == 0:
        raise MetricsException("Observed values are constant; slope and intercept are undefined.")

    rmse = float(np.sqrt(np.mean((predicted - observed) ** 2)))
    observed_dev = observed - observed.mean()
    predicted_dev = predicted - predicted.mean()
    slope = float(np.dot(observed_dev, predicted_dev) / np.dot(observed_dev, observed_dev))
    intercept = float(predicted.mean() - slope * observed.mean())
    total = float(np.dot(predicted_dev, predicted_dev))
    if total == 0:
        r2 = 0.0
    else:
        residual = predicted - (slope * observed + intercept)
        r2 = float(1.0 - np.dot(residual, residual) / total)
    return Metrics(r2, rmse, slope, intercept, n)


def metrics_row(pollutant, model_name, metrics):
    return dict(zip(METRICS_COLUMNS, (pollutant, model_name) + tuple(metrics)))


def binned_metrics(predicted, observed, feature_values, feature_name, n_bins=3):
    """Metrics within equal-count bins of one input feature; bins too uniform to score carry None."""
    predicted = np.asarray(predicted, dtype=float)
    observed = np.asarray(observed, dtype=float)
    feature_values = np.asarray(feature_values, dtype=float)
    edges = np.unique(np.quantile(feature_values, np.linspace(0, 1, n_bins + 1)))
    index = np.clip(np.searchsorted(edges, feature_values, side="right") - 1, 0, len(edges) - 2) \
        if len(edges) > 1 else np.zeros(len(feature_values), dtype=int)
    result = []
    for b in range(max(len(edges) - 1, 1)):
        rows = index == b
        lower = float(edges[b])
        upper = float(edges[b + 1]) if len(edges) > 1 else lower
        try:
            m = compute_metrics(predicted[rows], observed[rows])
        except MetricsException as e:
            metrics_logger.warning("Skipping {0} bin {1}: {2}".format(feature_name, b, e))
            m = None
        result.append(BinnedMetrics(feature_name, b, lower, upper, m))
    return result
