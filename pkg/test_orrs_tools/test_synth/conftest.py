import pytest

from orrs_tools.synth.fleet import FleetSpec, generate_fleet


@pytest.fixture
def small_spec():
    return FleetSpec(n_vehicles=300, seed=7)


@pytest.fixture
def small_fleet(small_spec):
    return generate_fleet(small_spec)
