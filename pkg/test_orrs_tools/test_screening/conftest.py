import numpy as np
import pytest

from orrs_tools.data.matching import apply_qc, match_records
from orrs_tools.data.records import POLLUTANTS, QcPolicy
from orrs_tools.screening.classify import aggregate_by_vin
from orrs_tools.screening.curves import StandardSet
from orrs_tools.screening.robustness import ScreeningDataset
from orrs_tools.screening.window import MetWindow, apply_met_window
from orrs_tools.synth.fleet import FleetSpec, generate_fleet


TRUTH_LOCATION = {"co": 1.0, "hc": -1.0, "no": -1.0}


def make_dataset(n=2000, seed=0, noise=0.2):
    rng = np.random.default_rng(seed)
    truth = {p: rng.lognormal(TRUTH_LOCATION[p], 1.0, size=n) for p in POLLUTANTS}
    predicted = {p: truth[p] * np.exp(rng.normal(scale=noise, size=n)) for p in POLLUTANTS}
    return ScreeningDataset(predicted, truth)


def in_window_vehicles(spec, policy=None, window=None):
    """Per-vehicle mean I/M truth over the samples that survive QC and the meteorological window."""
    fleet = generate_fleet(spec)
    samples = match_records(apply_qc(fleet.orrs, policy or QcPolicy()).kept, fleet.im).matched
    kept = apply_met_window(samples, window or MetWindow()).kept
    return aggregate_by_vin([s.vin for s in kept], {p: [s.target(p) for s in kept] for p in POLLUTANTS})


def fleet_dataset(truth, noise, seed):
    rng = np.random.default_rng(seed)
    n = len(truth[POLLUTANTS[0]])
    return ScreeningDataset({p: truth[p] * np.exp(noise * rng.normal(size=n)) for p in POLLUTANTS}, truth)


@pytest.fixture
def standards():
    return StandardSet()


@pytest.fixture(scope="module")
def dataset():
    return make_dataset()


@pytest.fixture(scope="module")
def default_fleet_truth():
    return in_window_vehicles(FleetSpec(n_vehicles=20000, seed=1))[1]


@pytest.fixture(scope="module")
def configured_fleet_truth():
    return in_window_vehicles(FleetSpec(n_vehicles=24000, seed=1))[1]
