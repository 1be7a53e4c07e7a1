import logging
import math
from collections import namedtuple
from dataclasses import dataclass, replace

import numpy as np
from joblib import Parallel, delayed

from orrs_tools.data.records import POLLUTANTS
from orrs_tools.screening.curves import DEFAULT_N_BINS, over_standard_rate_curve, find_thresholds, thresholds_for
from orrs_tools.screening.exceptions import ScreeningException, StratumTooSmallException
from orrs_tools.screening.window import bin_labels
from orrs_tools.utils import substream


robustness_logger = logging.getLogger(__name__)

THRESHOLD_KINDS = ("free", "re")
DEFAULT_KNEE_FRACTION = 0.1
ALL_POLLUTANTS = "all"

ScreeningDataset = namedtuple('ScreeningDataset', ('predicted', 'truth'))
ErrorSummary = namedtuple('ErrorSummary', ('mean', 're', 'ae'))
ThresholdRobustness = namedtuple(
    'ThresholdRobustness', ('pollutant', 'kind', 'reference', 'mean', 're', 'ae', 'samples', 'n_absent')
)
SweepRow = namedtuple('SweepRow', ('n', 'pollutant', 'kind', 'reference', 'mean', 're', 'ae'))
SweepResult = namedtuple('SweepResult', ('rows', 'knees'))
GroupThresholds = namedtuple('GroupThresholds', ('group', 'lower', 'upper', 'count', 'thresholds'))


@dataclass(frozen=True)
class MonteCarloConfig(object):
    t: int = 500
    n: int = 15000
    stratified: bool = True
    seed: int = 0
    n_bins: int = DEFAULT_N_BINS
    eps: float = 0.0

    def __post_init__(self):
        if self.t < 1 or self.n < 1:
            raise ValueError("MonteCarloConfig needs t >= 1 and n >= 1")


class RobustnessReport(object):
    def __init__(self, entries, config, dataset_size):
        self.entries = list(entries)
        self.config = config
        self.dataset_size = dataset_size

    def __repr__(self):
        return "RobustnessReport(t={0}, n={1}, entries={2})".format(self.config.t, self.config.n, len(self.entries))

    def entry(self, pollutant, kind):
        for e in self.entries:
            if e.pollutant == pollutant and e.kind == kind:
                return e
        raise KeyError((pollutant, kind))

    def rows(self):
        for e in self.entries:
            yield {
                "pollutant": e.pollutant, "kind": e.kind, "n": self.config.n, "t": self.config.t,
                "reference": e.reference, "mean": e.mean, "re_percent": e.re, "ae": e.ae, "n_absent": e.n_absent
            }


def dataset_size(dataset):
    return len(dataset.predicted[POLLUTANTS[0]])


def threshold_value(pair, kind):
    return pair.free_threshold if kind == "free" else pair.re_threshold


def relative_absolute_error(reference, samples):
    """Mean of the resampled thresholds with RE = |mean - x| / x * 100 (percent) and AE = |mean - x|."""
    samples = [s for s in samples if s is not None]
    if reference is None or not samples:
        return ErrorSummary(None, None, None)
    mean = math.fsum(samples) / len(samples)
    ae = abs(mean - reference)
    if reference == 0:
        re = 0.0 if ae == 0 else math.inf
    else:
        re = ae / abs(reference) * 100.0
    return ErrorSummary(mean, re, ae)


def _stratum_sizes(over, n):
    n_over = int(round(n * over.sum() / float(len(over))))
    return n_over, n - n_over


def check_strata(dataset, standards, n, stratified=True):
    total = dataset_size(dataset)
    if n > total:
        raise ScreeningException("Subsample size {0} exceeds dataset size {1}".format(n, total))
    if not stratified:
        return
    for p in POLLUTANTS:
        over = np.asarray(dataset.truth[p], dtype=float) > standards.standard(p)
        n_over, n_compliant = _stratum_sizes(over, n)
        if n_over > over.sum():
            raise StratumTooSmallException(p, "over-standard", n_over, int(over.sum()))
        if n_compliant > (~over).sum():
            raise StratumTooSmallException(p, "compliant", n_compliant, int((~over).sum()))


def stratified_draw(over, n, rng, stratified=True):
    """Row indices of a size-n subsample; stratified draws keep the over-standard share to within 1/n."""
    if not stratified:
        return rng.choice(len(over), size=n, replace=False)
    n_over, n_compliant = _stratum_sizes(over, n)
    return np.concatenate([
        rng.choice(np.nonzero(over)[0], size=n_over, replace=False),
        rng.choice(np.nonzero(~over)[0], size=n_compliant, replace=False),
    ])


def _repetition(dataset, standards, cfg, repetition):
    pairs = {}
    for index, p in enumerate(POLLUTANTS):
        predicted = np.asarray(dataset.predicted[p], dtype=float)
        truth = np.asarray(dataset.truth[p], dtype=float)
        standard = standards.standard(p)
        rows = stratified_draw(truth > standard, cfg.n, substream(cfg.seed, repetition, index), cfg.stratified)
        curve = over_standard_rate_curve(predicted[rows], truth[rows], standard, cfg.n_bins, p)
        pairs[p] = find_thresholds(curve, cfg.eps)
    return pairs


def monte_carlo_thresholds(dataset, standards, cfg, reference=None, n_jobs=1):
    """T stratified subsamples of size n; thresholds recomputed per subsample and scored against the reference."""
    check_strata(dataset, standards, cfg.n, cfg.stratified)
    reference = reference or thresholds_for(dataset.predicted, dataset.truth, standards, cfg.n_bins, cfg.eps)
    repetitions = Parallel(n_jobs=n_jobs)(
        delayed(_repetition)(dataset, standards, cfg, r) for r in range(cfg.t)
    )
    entries = []
    for p in POLLUTANTS:
        for kind in THRESHOLD_KINDS:
            samples = [threshold_value(rep[p], kind) for rep in repetitions]
            x = threshold_value(reference[p], kind)
            summary = relative_absolute_error(x, samples)
            entries.append(ThresholdRobustness(
                p, kind, x, summary.mean, summary.re, summary.ae, samples, sum(s is None for s in samples)
            ))
    robustness_logger.info("Monte Carlo thresholds: T={0}, n={1}, {2}".format(cfg.t, cfg.n, ", ".join(
        "{0}/{1} RE={2}".format(e.pollutant, e.kind, "n/a" if e.re is None else "{0:.2f}%".format(e.re))
        for e in entries
    )))
    return RobustnessReport(entries, cfg, dataset_size(dataset))


def find_knee(sizes, errors, fraction=DEFAULT_KNEE_FRACTION):
    """Smallest size whose RE improves by less than ``fraction`` (relative) at the next size."""
    for i in range(len(sizes) - 1):
        current, following = errors[i], errors[i + 1]
        if current is None or following is None:
            continue
        improvement = 0.0 if current == 0 else (current - following) / current
        if improvement < fraction:
            return sizes[i]
    return None


def sample_size_sweep(dataset, standards, sizes, t, seed=0, knee_fraction=DEFAULT_KNEE_FRACTION, base_config=None,
                      n_jobs=1):
    sizes = list(sizes)
    if sizes != sorted(sizes) or len(set(sizes)) != len(sizes):
        raise ScreeningException("Sweep sizes must be strictly ascending: {0}".format(sizes))
    available = dataset_size(dataset)
    if sizes and sizes[-1] > available:
        robustness_logger.warning("Skipping sweep sizes {0}; only {1} vehicles are available.".format(
            [n for n in sizes if n > available], available
        ))
        sizes = [n for n in sizes if n <= available]
        if not sizes:
            raise ScreeningException("No sweep size fits a dataset of {0} vehicles.".format(available))
    base_config = base_config or MonteCarloConfig()
    reference = thresholds_for(dataset.predicted, dataset.truth, standards, base_config.n_bins, base_config.eps)
    rows = []
    for n in sizes:
        report = monte_carlo_thresholds(
            dataset, standards, replace(base_config, t=t, n=n, seed=seed), reference, n_jobs
        )
        rows.extend(SweepRow(n, e.pollutant, e.kind, e.reference, e.mean, e.re, e.ae) for e in report.entries)

    knees = {}
    if len(sizes) < 3:
        robustness_logger.warning("Sweep over {0} sizes; knee estimation needs at least 3.".format(len(sizes)))
        return SweepResult(rows, knees)
    for kind in THRESHOLD_KINDS:
        for p in POLLUTANTS:
            errors = [r.re for n in sizes for r in rows if r.n == n and r.pollutant == p and r.kind == kind]
            knees[(p, kind)] = find_knee(sizes, errors, knee_fraction)
        pooled = []
        for n in sizes:
            values = [r.re for r in rows if r.n == n and r.kind == kind and r.re is not None]
            pooled.append(float(np.mean(values)) if values else None)
        knees[(ALL_POLLUTANTS, kind)] = find_knee(sizes, pooled, knee_fraction)
    return SweepResult(rows, knees)


def thresholds_by_group(dataset, standards, values, edges, n_bins=DEFAULT_N_BINS, eps=0.0, min_count=None):
    """Thresholds recomputed inside each [edges[i], edges[i+1]) slice of a conditioning variable (VSP, T, RH)."""
    labels = bin_labels(values, edges)
    min_count = min_count or 2 * n_bins
    result = []
    for group in range(len(edges) - 1):
        rows = np.nonzero(labels == group)[0]
        if len(rows) < min_count:
            robustness_logger.warning("Group [{0}, {1}) has {2} rows; too few for {3} bins.".format(
                edges[group], edges[group + 1], len(rows), n_bins
            ))
            result.append(GroupThresholds(group, float(edges[group]), float(edges[group + 1]), len(rows), None))
            continue
        pairs = thresholds_for(
            {p: np.asarray(dataset.predicted[p], dtype=float)[rows] for p in POLLUTANTS},
            {p: np.asarray(dataset.truth[p], dtype=float)[rows] for p in POLLUTANTS},
            standards, n_bins, eps
        )
        result.append(GroupThresholds(group, float(edges[group]), float(edges[group + 1]), len(rows), pairs))
    return result
