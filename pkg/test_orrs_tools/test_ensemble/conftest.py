import numpy as np
import pytest

from orrs_tools.data.features import FeatureSchema, EncoderSet
from orrs_tools.data.matching import match_records
from orrs_tools.data.records import POLLUTANTS
from orrs_tools.ensemble.stacking import TrainingSet, BaseConfigs
from orrs_tools.learn.forest import ForestConfig
from orrs_tools.learn.gbt import GbtConfig
from orrs_tools.learn.mlp import MlpConfig
from orrs_tools.synth.fleet import FleetSpec, generate_fleet


def array_training_set(X, y, vins):
    schema = FeatureSchema(("rs_co", "rs_hc", "rs_no", "velocity")[:X.shape[1]])
    return TrainingSet(X, {p: y for p in POLLUTANTS}, vins, schema, EncoderSet([]))


@pytest.fixture(scope="module")
def fleet_samples():
    fleet = generate_fleet(FleetSpec(n_vehicles=150, seed=21))
    return match_records(fleet.orrs, fleet.im).matched


@pytest.fixture(scope="module")
def training_set(fleet_samples):
    schema = FeatureSchema()
    return TrainingSet.from_samples(fleet_samples, schema, EncoderSet.fit(fleet_samples, schema))


@pytest.fixture
def base_configs():
    return BaseConfigs(
        MlpConfig(hidden_layers=(8,), epochs=5, batch_size=64, seed=1),
        ForestConfig(n_trees=8, max_depth=4, seed=1),
        GbtConfig(n_rounds=15, max_depth=3, seed=1),
    )


@pytest.fixture
def meta_config():
    return GbtConfig(n_rounds=20, max_depth=2, subsample=1.0, colsample=1.0, learning_rate=0.1,
                     gain_prune_threshold=0.0)


@pytest.fixture
def small_arrays():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(12, 2))
    y = np.abs(X[:, 0]) + 0.1
    return X, y, ["VIN{0:02d}".format(i) for i in range(12)]
