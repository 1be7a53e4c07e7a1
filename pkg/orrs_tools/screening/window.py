import logging
from collections import namedtuple
from dataclasses import dataclass

import numpy as np


window_logger = logging.getLogger(__name__)

WindowResult = namedtuple('WindowResult', ('kept', 'excluded'))


@dataclass(frozen=True)
class MetWindow(object):
    """Kept: temperature in [t_low, t_high] degC, RH < rh_max %, wind < wind_max m/s, VSP < vsp_max kW/t."""
    t_low: float = 6.0
    t_high: float = 32.0
    rh_max: float = 80.0
    wind_max: float = 5.0
    vsp_max: float = 18.0

    def __post_init__(self):
        if self.t_low > self.t_high:
            raise ValueError("Empty temperature range [{0}, {1}]".format(self.t_low, self.t_high))

    def mask(self, temperature, relative_humidity, wind_speed, vsp):
        temperature = np.asarray(temperature, dtype=float)
        return (
            (temperature >= self.t_low) & (temperature <= self.t_high)
            & (np.asarray(relative_humidity, dtype=float) < self.rh_max)
            & (np.asarray(wind_speed, dtype=float) < self.wind_max)
            & (np.asarray(vsp, dtype=float) < self.vsp_max)
        )

    def contains(self, sample):
        o = sample.orrs
        return bool(self.mask(o.temperature, o.relative_humidity, o.wind_speed, sample.vsp))


def apply_met_window(samples, window=None):
    window = window or MetWindow()
    kept, excluded = [], []
    for sample in samples:
        (kept if window.contains(sample) else excluded).append(sample)
    total = len(kept) + len(excluded)
    window_logger.info("Meteorological window kept {0} of {1} samples ({2:.2%})".format(
        len(kept), total, len(kept) / float(total) if total else 0.0
    ))
    return WindowResult(kept, excluded)


def bin_labels(values, edges):
    """Label rows by the half-open interval [edges[i], edges[i+1]) they fall in; -1 outside."""
    values = np.asarray(values, dtype=float)
    edges = np.asarray(edges, dtype=float)
    index = np.searchsorted(edges, values, side="right") - 1
    index[(values < edges[0]) | (values >= edges[-1])] = -1
    return index
