import logging
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from orrs_tools.data.records import POLLUTANTS
from orrs_tools.screening.exceptions import ScreeningException


curves_logger = logging.getLogger(__name__)

DEFAULT_N_BINS = 50

RateBin = namedtuple('RateBin', ('lower', 'upper', 'rate', 'count'))


@dataclass(frozen=True)
class StandardSet(object):
    """Official limits in g/km."""
    co: float = 8.0
    hc: float = 1.6
    no: float = 1.3

    def __post_init__(self):
        if min(self.co, self.hc, self.no) <= 0:
            raise ValueError("Standards must be positive: {0}".format(self))

    def standard(self, pollutant):
        return getattr(self, pollutant)


class RateCurve(object):
    """Ordered, disjoint and covering bins of predicted magnitude with their over-standard rate."""

    def __init__(self, bins, standard, pollutant=None, degenerate=False):
        self.bins = list(bins)
        self.standard = standard
        self.pollutant = pollutant
        self.degenerate = degenerate
        for previous, current in zip(self.bins, self.bins[1:]):
            if current.lower < previous.upper:
                raise ScreeningException("Rate curve bins overlap: {0} / {1}".format(previous, current))

    def __repr__(self):
        return "RateCurve(pollutant={0}, bins={1}, n={2})".format(self.pollutant, len(self.bins), self.n)

    def __len__(self):
        return len(self.bins)

    @property
    def n(self):
        return sum(b.count for b in self.bins)

    @property
    def rates(self):
        return np.array([b.rate for b in self.bins])

    def rows(self):
        for index, b in enumerate(self.bins):
            yield {
                "pollutant": self.pollutant, "bin": index, "lower": b.lower, "upper": b.upper, "rate": b.rate,
                "count": b.count
            }


ThresholdPair = namedtuple('ThresholdPair', ('pollutant', 'free_threshold', 're_threshold'))


def equal_count_cuts(sorted_values, n_bins):
    """Row positions splitting sorted values into ~equal-count bins, never separating tied values."""
    n = len(sorted_values)
    cuts = []
    for i in range(1, n_bins):
        position = int(round(i * n / float(n_bins)))
        while 0 < position < n and sorted_values[position - 1] == sorted_values[position]:
            position += 1
        if 0 < position < n and (not cuts or position > cuts[-1]):
            cuts.append(position)
    return cuts


def over_standard_rate_curve(predicted, truth, standard, n_bins=DEFAULT_N_BINS, pollutant=None):
    predicted = np.asarray(predicted, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if predicted.shape != truth.shape or not len(predicted):
        raise ScreeningException("Predicted and truth vectors must be non-empty and equally long.")
    if n_bins < 2:
        raise ScreeningException("n_bins must be >= 2, got {0}".format(n_bins))
    order = np.argsort(predicted, kind="mergesort")
    values = predicted[order]
    over = (truth[order] > standard).astype(float)
    cuts = equal_count_cuts(values, n_bins)
    degenerate = not cuts
    if degenerate:
        curves_logger.warning("All {0} predictions are identical; rate curve has a single bin.".format(
            pollutant or "predicted"
        ))
    bounds = [0] + cuts + [len(values)]
    edges = [float(values[0])] + [(values[c - 1] + values[c]) / 2.0 for c in cuts] + [float(values[-1])]
    bins = [
        RateBin(float(edges[i]), float(edges[i + 1]), float(over[start:end].mean()), end - start)
        for i, (start, end) in enumerate(zip(bounds[:-1], bounds[1:]))
    ]
    return RateCurve(bins, standard, pollutant, degenerate)


def find_thresholds(curve, eps=0.0):
    """Free threshold: top of the longest prefix with rate <= eps. Re threshold: bottom of the longest
    suffix with rate >= 1 - eps. Either is None when no bin qualifies."""
    if not 0 <= eps < 0.5:
        raise ScreeningException("eps must lie in [0, 0.5), got {0}".format(eps))
    if curve.degenerate:
        curves_logger.warning("Degenerate {0} rate curve; no thresholds derived.".format(curve.pollutant))
        return ThresholdPair(curve.pollutant, None, None)
    rates = curve.rates
    free, re = None, None

    prefix = 0
    while prefix < len(rates) and rates[prefix] <= eps:
        prefix += 1
    if prefix:
        free = curve.bins[prefix - 1].upper

    suffix = len(rates)
    while suffix > 0 and rates[suffix - 1] >= 1.0 - eps:
        suffix -= 1
    if suffix < len(rates):
        re = curve.bins[suffix].lower

    if free is not None and re is not None and free > re:
        raise ScreeningException("Free threshold {0} exceeds Re threshold {1} for {2}".format(
            free, re, curve.pollutant
        ))
    return ThresholdPair(curve.pollutant, free, re)


def thresholds_for(predicted, truth, standards, n_bins=DEFAULT_N_BINS, eps=0.0):
    """ThresholdPair per pollutant from {pollutant: vector} predictions and truths."""
    return {
        p: find_thresholds(
            over_standard_rate_curve(predicted[p], truth[p], standards.standard(p), n_bins, p), eps
        )
        for p in POLLUTANTS
    }
