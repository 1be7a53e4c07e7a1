import math
import os

import numpy as np
import pytest

from orrs_tools.data.records import POLLUTANTS
from orrs_tools.screening.exceptions import ScreeningException
from orrs_tools.screening.robustness import MonteCarloConfig, relative_absolute_error, monte_carlo_thresholds, \
    stratified_draw, check_strata, find_knee, sample_size_sweep, thresholds_by_group, \
    THRESHOLD_KINDS, ALL_POLLUTANTS

from orrs_tools.cli.config import load_config

from test_orrs_tools.test_screening.conftest import make_dataset, in_window_vehicles, fleet_dataset


def test_hand_case():
    summary = relative_absolute_error(2.0, [1.9, 2.1, 2.3])
    assert summary.mean == pytest.approx(2.1)
    assert summary.re == pytest.approx(5.0)
    assert summary.ae == pytest.approx(0.1)


def test_error_identities():
    exact = relative_absolute_error(1.5, [1.5, 1.5])
    assert exact.re == 0.0 and exact.ae == 0.0
    samples = [0.8, 1.1, 1.7]
    base = relative_absolute_error(1.0, samples)
    scaled = relative_absolute_error(3.0, [3 * s for s in samples])
    assert scaled.re == pytest.approx(base.re)
    assert scaled.ae == pytest.approx(3 * base.ae)
    assert base.re >= 0 and base.ae >= 0


def test_absent_thresholds_are_skipped():
    assert relative_absolute_error(None, [1.0]) == (None, None, None)
    assert relative_absolute_error(2.0, [None, None]) == (None, None, None)
    assert relative_absolute_error(2.0, [None, 2.2]).ae == pytest.approx(0.2)
    assert math.isinf(relative_absolute_error(0.0, [1.0]).re)


def test_single_full_draw_reproduces_reference(dataset, standards):
    n = len(dataset.predicted["co"])
    report = monte_carlo_thresholds(dataset, standards, MonteCarloConfig(t=1, n=n, seed=3))
    present = [e for e in report.entries if e.reference is not None]
    assert present
    for e in present:
        assert e.mean == e.reference
        assert e.re == 0.0 and e.ae == 0.0
    assert len(report.entries) == len(POLLUTANTS) * len(THRESHOLD_KINDS)


def test_monte_carlo_is_seeded_and_schedule_independent(dataset, standards):
    cfg = MonteCarloConfig(t=6, n=800, seed=5)
    serial = monte_carlo_thresholds(dataset, standards, cfg)
    parallel = monte_carlo_thresholds(dataset, standards, cfg, n_jobs=2)
    assert [e.samples for e in serial.entries] == [e.samples for e in parallel.entries]
    entry = serial.entry("co", "re")
    assert len(entry.samples) == 6
    assert entry.n_absent == sum(s is None for s in entry.samples)
    rows = list(serial.rows())
    assert rows[0]["t"] == 6 and rows[0]["n"] == 800


def test_stratified_draw_preserves_ratio():
    over = np.zeros(1000, dtype=bool)
    over[:137] = True
    for seed in range(5):
        rows = stratified_draw(over, 300, np.random.default_rng(seed))
        assert len(set(rows)) == 300
        assert abs(over[rows].mean() - over.mean()) <= 1.0 / 300


def test_subsample_larger_than_dataset(dataset, standards):
    with pytest.raises(ScreeningException):
        check_strata(dataset, standards, len(dataset.predicted["co"]) + 1)


@pytest.mark.parametrize(
    "errors,expected",
    [
        ([10.0, 5.0, 4.8, 4.7], 2000),
        ([10.0, 5.0, 2.0, 1.0], None),
        ([None, 5.0, 4.9, 1.0], 2000),
        ([0.0, 0.0, 0.0, 0.0], 1000),
    ]
)
def test_find_knee(errors, expected):
    assert find_knee([1000, 2000, 3000, 4000], errors) == expected


def test_sweep_table_and_knees(dataset, standards):
    sizes = [400, 800, 1600]
    result = sample_size_sweep(dataset, standards, sizes, t=4, seed=1)
    assert len(result.rows) == len(sizes) * len(POLLUTANTS) * len(THRESHOLD_KINDS)
    assert set(result.knees) == {(p, k) for p in POLLUTANTS + (ALL_POLLUTANTS,) for k in THRESHOLD_KINDS}
    for knee in result.knees.values():
        assert knee is None or knee in sizes


def test_two_sizes_give_no_knee(dataset, standards, caplog):
    result = sample_size_sweep(dataset, standards, [400, 800], t=2)
    assert result.knees == {}
    assert len(result.rows) == 12
    assert "knee" in caplog.text


def test_sweep_sizes_must_ascend(dataset, standards):
    with pytest.raises(ScreeningException):
        sample_size_sweep(dataset, standards, [800, 400, 1600], t=2)


@pytest.mark.slow
def test_error_shrinks_with_sample_size(standards):
    sizes = [500, 2000, 8000]
    pooled = np.zeros(len(sizes))
    for seed in range(5):
        data = make_dataset(n=20000, seed=seed)
        result = sample_size_sweep(data, standards, sizes, t=20, seed=seed)
        for i, n in enumerate(sizes):
            values = [r.re for r in result.rows if r.n == n and r.re is not None]
            pooled[i] += np.mean(values)
    assert pooled[0] >= pooled[1] >= pooled[2]


def test_thresholds_by_group(dataset, standards):
    n = len(dataset.predicted["co"])
    vsp = np.linspace(0.0, 30.0, n)
    groups = thresholds_by_group(dataset, standards, vsp, [0.0, 18.0, 29.9, 30.0], n_bins=10)
    assert [g.group for g in groups] == [0, 1, 2]
    assert groups[0].count + groups[1].count + groups[2].count == n - 1
    assert sorted(groups[0].thresholds) == sorted(POLLUTANTS)
    assert groups[2].count < 20 and groups[2].thresholds is None


def test_config_bounds():
    with pytest.raises(ValueError):
        MonteCarloConfig(t=0)


def test_sweep_skips_sizes_beyond_the_dataset(dataset, standards, caplog):
    result = sample_size_sweep(dataset, standards, [400, 800, 1600, 4000], t=2)
    assert sorted({r.n for r in result.rows}) == [400, 800, 1600]
    assert "Skipping sweep sizes [4000]" in caplog.text
    assert set(result.knees.values()) <= {None, 400, 800, 1600}


def test_sweep_with_no_fitting_size(dataset, standards):
    with pytest.raises(ScreeningException):
        sample_size_sweep(dataset, standards, [4000, 8000], t=2)


EXAMPLE_CONFIG = os.path.join(os.path.dirname(__file__), "..", "..", "examples_config", "pipeline.yaml")


@pytest.mark.slow
@pytest.mark.parametrize("path", [EXAMPLE_CONFIG, None])
def test_configured_sizes_fit_the_windowed_fleet(path):
    cfg = load_config(path, environ={})
    vins, truth = in_window_vehicles(cfg.fleet_spec(), cfg.qc_policy(), cfg.met_window_spec())
    assert max(cfg.sweep.sizes) <= len(vins)
    assert cfg.monte_carlo.n <= len(vins)
    check_strata(fleet_dataset(truth, 0.0, cfg.seed), cfg.standard_set(), cfg.monte_carlo.n)


def _pooled_errors(result, sizes, kind):
    pooled = []
    for n in sizes:
        values = [r.re for r in result.rows if r.n == n and r.kind == kind and r.re is not None]
        pooled.append(float(np.mean(values)) if values else None)
    return pooled


@pytest.mark.slow
def test_monte_carlo_structure_on_synthetic_fleet(configured_fleet_truth, standards):
    sizes = [2000, 5000, 10000, 15000]
    data = fleet_dataset(configured_fleet_truth, 0.1, 3)
    averaged = {kind: np.zeros(len(sizes)) for kind in THRESHOLD_KINDS}
    for seed in range(3):
        result = sample_size_sweep(data, standards, sizes, t=100, seed=seed, n_jobs=-1)
        for kind in THRESHOLD_KINDS:
            pooled = _pooled_errors(result, sizes, kind)
            assert None not in pooled
            averaged[kind] += pooled
    for kind in THRESHOLD_KINDS:
        errors = averaged[kind] / 3.0
        assert all(later <= earlier for earlier, later in zip(errors, errors[1:]))
    knees = {kind: find_knee(sizes, list(averaged[kind] / 3.0)) for kind in THRESHOLD_KINDS}
    assert (knees["re"] or math.inf) >= (knees["free"] or math.inf)
