import os
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from orrs_tools.data.matching import apply_qc, match_records
from orrs_tools.data.records import QcPolicy, POLLUTANTS
from orrs_tools.screening.window import MetWindow, apply_met_window
from orrs_tools.synth.exceptions import FleetSpecException
from orrs_tools.synth.fleet import FleetSpec, generate_fleet, corrupt_for_robustness, write_fleet, FleetFiles, \
    latent_factor_grid, noise_sigma, exceedance, solve_body_sigma, body_sigmas
from orrs_tools.screening.curves import StandardSet
from orrs_tools.utils import file_sha256


def _top_share(values):
    ordered = np.sort(values)
    n_top = int(round(0.1 * len(ordered)))
    return ordered[-n_top:].sum() / ordered.sum()


def test_same_seed_same_fleet(small_spec, small_fleet):
    again = generate_fleet(small_spec)
    assert again == small_fleet


def test_different_seed_different_fleet(small_spec, small_fleet):
    other = generate_fleet(replace(small_spec, seed=8))
    assert other.orrs != small_fleet.orrs


def test_same_seed_same_files(tmp_path, small_spec):
    first = write_fleet(generate_fleet(small_spec), str(tmp_path / "a"))
    second = write_fleet(generate_fleet(small_spec), str(tmp_path / "b"))
    for key in ("orrs", "im", "truth"):
        assert file_sha256(first[key]) == file_sha256(second[key])
    assert first["orrs"].endswith(FleetFiles.ORRS)
    assert os.path.exists(os.path.join(str(tmp_path / "a"), FleetFiles.TRUTH))


def test_fleet_shape(small_spec, small_fleet):
    assert len(small_fleet.truth) == small_spec.n_vehicles
    assert len(small_fleet.orrs) >= small_spec.n_vehicles
    assert len({r.vin for r in small_fleet.im}) == small_spec.n_vehicles
    assert all(min(p.co, p.hc, p.no) >= 0 for p in small_fleet.truth)


def test_every_roadside_record_matches(small_fleet):
    result = match_records(small_fleet.orrs, small_fleet.im)
    assert len(result.matched) == len(small_fleet.orrs)
    assert not any(s.fallback for s in result.matched)


@pytest.mark.parametrize("share", [0.5, 0.55, 0.7])
def test_factor_grid_hits_top_decile_share(share):
    grid = latent_factor_grid(10000, 0.05, 1.0, share)
    assert _top_share(grid) == pytest.approx(share, abs=1e-6)
    assert np.median(grid) == pytest.approx(0.05, rel=0.05)


def test_dirty_flags_follow_factor_quantile(small_fleet):
    for p in POLLUTANTS:
        values = np.array([t.factor(p) for t in small_fleet.truth])
        flags = np.array([getattr(t, "dirty_" + p) for t in small_fleet.truth])
        assert flags.sum() == 30
        assert values[flags].min() >= values[~flags].max()


def test_roadside_signal_present():
    fleet = generate_fleet(FleetSpec(n_vehicles=1000, seed=3))
    factor = {t.plate: t.hc for t in fleet.truth}
    rho, _ = stats.spearmanr([factor[r.plate] for r in fleet.orrs], [r.rs_hc for r in fleet.orrs])
    assert rho > 0.6


def test_noise_grows_outside_window():
    assert noise_sigma(20.0, 50.0, 1.0) < noise_sigma(35.0, 50.0, 1.0)
    assert noise_sigma(20.0, 50.0, 1.0) < noise_sigma(20.0, 90.0, 1.0)
    assert noise_sigma(20.0, 50.0, 1.0) < noise_sigma(20.0, 50.0, 6.0)


def test_qc_violation_calibration():
    fleet = generate_fleet(FleetSpec(n_vehicles=2000, seed=5))
    result = apply_qc(fleet.orrs, QcPolicy())
    assert len(result.dropped) == int(round(0.0656 * len(fleet.orrs)))


def test_out_of_window_rate():
    spec = FleetSpec(n_vehicles=1000, qc_violation_rate=0.0, out_of_window_rate=0.2, seed=2)
    fleet = generate_fleet(spec)
    samples = match_records(fleet.orrs, fleet.im).matched
    result = apply_met_window(samples, MetWindow())
    assert len(result.excluded) == int(round(0.2 * len(samples)))


@pytest.mark.slow
def test_calibration_at_scale():
    fleet = generate_fleet(FleetSpec(n_vehicles=100000, seed=11))
    dropped = len(apply_qc(fleet.orrs, QcPolicy()).dropped) / float(len(fleet.orrs))
    assert dropped == pytest.approx(0.0656, abs=0.005)
    hc = np.array([t.hc for t in fleet.truth])
    assert _top_share(hc) == pytest.approx(0.55, abs=0.03)
    assert np.median(hc) == pytest.approx(0.05, rel=0.05)


@pytest.mark.parametrize(
    "overrides",
    [
        {"top_decile_share": 0.45},
        {"top_decile_share": 1.0},
        {"n_vehicles": 99},
        {"median_im_hc": 0.0},
        {"qc_violation_rate": 1.0},
        {"qc_violation_rate": 0.1, "out_of_window_rate": 0.05},
        {"seed": -1},
        {"over_standard_share": 0.0},
        {"over_standard_share": 0.5},
    ]
)
def test_invalid_spec(overrides):
    with pytest.raises(FleetSpecException):
        FleetSpec(**overrides)


def test_corrupt_zero_is_identity(small_fleet):
    assert corrupt_for_robustness(small_fleet.orrs, 0.0, 1) == small_fleet.orrs


def test_corrupt_counts(small_fleet):
    records = small_fleet.orrs
    corrupted = corrupt_for_robustness(records, 0.25, 4)
    changed = sum(a != b for a, b in zip(records, corrupted))
    assert changed == int(round(0.25 * len(records)))
    assert corrupted == corrupt_for_robustness(records, 0.25, 4)


def test_corrupt_all_leaves_window(small_fleet):
    corrupted = corrupt_for_robustness(small_fleet.orrs, 1.0, 9)
    window = MetWindow()
    assert not window.mask(
        [r.temperature for r in corrupted], [r.relative_humidity for r in corrupted],
        [r.wind_speed for r in corrupted], [0.0] * len(corrupted)
    ).any()
    assert len(apply_qc(corrupted, QcPolicy()).dropped) <= len(apply_qc(small_fleet.orrs, QcPolicy()).dropped)


def test_corrupt_rejects_bad_fraction(small_fleet):
    with pytest.raises(FleetSpecException):
        corrupt_for_robustness(small_fleet.orrs, 1.5, 0)


def test_exceedance_is_continuous_at_the_splice():
    median, sigma = 0.05, 1.3
    q_splice = median * np.exp(sigma * stats.norm.ppf(0.9))
    assert exceedance(median, sigma, 2.0, q_splice) == pytest.approx(0.1)
    assert exceedance(median, sigma, 2.0, q_splice * 1.0001) == pytest.approx(0.1, rel=1e-3)
    assert exceedance(median, sigma, 2.0, q_splice * 4) == pytest.approx(0.1 / 16)
    assert exceedance(median, sigma, 2.0, median) == pytest.approx(0.5)


@pytest.mark.parametrize("share", [0.02, 0.05, 0.1])
def test_solved_spread_puts_share_over_standard(share):
    sigma = solve_body_sigma(10000, 0.05, 0.5, share, 0.55)
    grid = latent_factor_grid(10000, 0.05, sigma, 0.55)
    assert np.mean(grid > 0.5) == pytest.approx(share, abs=0.002)
    assert _top_share(grid) == pytest.approx(0.55, abs=1e-6)


def test_unreachable_share_is_rejected():
    with pytest.raises(FleetSpecException):
        solve_body_sigma(10000, 0.05, 0.04, 0.3, 0.55)


def test_fixed_spread_without_share():
    spec = FleetSpec(n_vehicles=500, over_standard_share=None, body_sigma=0.8)
    assert body_sigmas(spec) == {p: 0.8 for p in POLLUTANTS}


def test_fleet_over_standard_share():
    spec = FleetSpec(n_vehicles=4000, seed=4)
    fleet = generate_fleet(spec)
    standards = StandardSet()
    for p in POLLUTANTS:
        values = np.array([t.factor(p) for t in fleet.truth])
        assert np.mean(values > standards.standard(p)) == pytest.approx(0.05, abs=0.003), p
        assert _top_share(values) == pytest.approx(0.55, abs=0.01), p
