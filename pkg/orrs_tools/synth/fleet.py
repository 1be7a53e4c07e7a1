"""Reproducible synthetic fleet with paired roadside and inspection measurements.

Latent per-vehicle emission factors follow a log-normal body spliced at the
90th percentile to a Pareto tail whose index is solved so that the dirtiest
decile carries ``top_decile_share`` of the fleet total. The body spread is in
turn solved per pollutant so that ``over_standard_share`` of the fleet exceeds
its standard, which keeps an over-standard tail several rate-curve bins deep. Factors are laid out on
a midpoint quantile grid, then assigned to vehicles by a seeded score that
couples all three pollutants to a shared dirtiness term and to mileage.

Roadside ratios are a noisy, meteorology-modulated transform of the factors:

    rs = factor * RATIO_PER_G_KM * load(vsp) * bias(T, RH) * exp(sigma * z)
    sigma = 0.08 + 0.003 * RH + 0.04 * wind + 0.012 * |T - 20|

Inspection readings are the factor times a 5% log-normal noise, degraded
backwards in mileage for earlier inspections.
"""
import logging
import math
import os
from collections import namedtuple
from dataclasses import dataclass, field, replace, asdict
from datetime import date, timedelta
from typing import Optional

import numpy as np
import pandas as pd
from scipy import optimize, stats

from orrs_tools.data.io import write_orrs, write_im, write_frame
from orrs_tools.data.records import OrrsRecord, ImRecord, POLLUTANTS, date_to_timestamp
from orrs_tools.data.vsp import compute_vsp, LIGHT_DUTY, KMH_TO_MS
from orrs_tools.screening.curves import StandardSet
from orrs_tools.synth.exceptions import FleetSpecException
from orrs_tools.utils import substream


fleet_logger = logging.getLogger(__name__)

# Exhaust CO2 mole fraction used to convert the HC ppm anchor into a ratio.
EXHAUST_CO2_PPM = 140000.0
NOMINAL_VSP = 5.0
LOAD_SLOPE = 0.03
IM_NOISE_SIGMA = 0.05
DETERIORATION_PER_10K_KM = 0.03
TAIL_QUANTILE = 0.9
ALPHA_BRACKET = (0.3, 200.0)
MIN_BODY_SIGMA = 0.1
MAX_BODY_SIGMA = 8.0
GLOBAL_STREAM = 2 ** 32 - 1

# Roadside ratio per g/km for CO and NO; HC is derived from the ppm anchor.
CO_RATIO_PER_G_KM = 0.01
NO_RATIO_PER_G_KM = 0.002

REFERENCE_YEAR = 2020
ORRS_START = date(2020, 1, 1)
SECONDS_PER_YEAR = 366 * 86400

SITES = ("SITE_A", "SITE_B")
ENGINE_TYPES = (("NA", 0.6), ("TURBO", 0.35), ("HYBRID", 0.05))
FUEL_TYPES = (("GASOLINE_92", 0.55), ("GASOLINE_95", 0.40), ("GASOLINE_98", 0.05))
CAPACITIES = ((1.0, 0.06), (1.2, 0.10), (1.4, 0.16), (1.5, 0.20), (1.6, 0.18),
              (1.8, 0.12), (2.0, 0.11), (2.4, 0.05), (3.0, 0.02))
N_BRANDS = 20

WindowLimits = namedtuple('WindowLimits', ('t_low', 't_high', 'rh_max', 'wind_max', 'vsp_max'))
DEFAULT_WINDOW_LIMITS = WindowLimits(6.0, 32.0, 80.0, 5.0, 18.0)


@dataclass(frozen=True)
class MetRegime(object):
    temperature_mean: float = 18.0
    temperature_sd: float = 6.5
    rh_mean: float = 58.0
    rh_sd: float = 14.0
    wind_shape: float = 2.0
    wind_scale: float = 1.1
    pressure_mean: float = 1013.0
    pressure_sd: float = 6.0


@dataclass(frozen=True)
class FleetSpec(object):
    n_vehicles: int = 20000
    top_decile_share: float = 0.55
    orrs_records_per_vehicle: float = 1.1
    median_im_hc: float = 0.05
    median_im_co: float = 0.60
    median_im_no: float = 0.12
    median_orrs_hc_ppm: float = 15.0
    body_sigma: float = 1.0
    over_standard_share: Optional[float] = 0.05
    standards: StandardSet = field(default_factory=StandardSet)
    met_regime: MetRegime = field(default_factory=MetRegime)
    qc_violation_rate: float = 0.0656
    out_of_window_rate: Optional[float] = None
    seed: int = 1

    def __post_init__(self):
        if not 0.5 <= self.top_decile_share < 1:
            raise FleetSpecException("top_decile_share must lie in [0.5, 1), got {0}".format(self.top_decile_share))
        if self.n_vehicles < 100:
            raise FleetSpecException("n_vehicles must be at least 100, got {0}".format(self.n_vehicles))
        if self.orrs_records_per_vehicle < 1:
            raise FleetSpecException("orrs_records_per_vehicle must be >= 1")
        if min(self.median_im_hc, self.median_im_co, self.median_im_no, self.median_orrs_hc_ppm,
               self.body_sigma) <= 0:
            raise FleetSpecException("Medians and body_sigma must be positive.")
        if self.over_standard_share is not None and not 0 < self.over_standard_share < 0.5:
            raise FleetSpecException(
                "over_standard_share must lie in (0, 0.5), got {0}".format(self.over_standard_share)
            )
        if not 0 <= self.qc_violation_rate < 1:
            raise FleetSpecException("qc_violation_rate must lie in [0, 1)")
        if self.out_of_window_rate is not None and not self.qc_violation_rate <= self.out_of_window_rate <= 1:
            raise FleetSpecException("out_of_window_rate must lie in [qc_violation_rate, 1]")
        if self.seed < 0:
            raise FleetSpecException("seed must be non-negative")

    def median(self, pollutant):
        return getattr(self, "median_im_" + pollutant)

    def ratio_per_g_km(self, pollutant):
        if pollutant == "hc":
            return (self.median_orrs_hc_ppm / EXHAUST_CO2_PPM) / self.median_im_hc
        elif pollutant == "co":
            return CO_RATIO_PER_G_KM
        return NO_RATIO_PER_G_KM


@dataclass(frozen=True)
class EmitterProfile(object):
    vin: str
    plate: str
    co: float
    hc: float
    no: float
    deterioration_co: float
    deterioration_hc: float
    deterioration_no: float
    dirty_co: bool
    dirty_hc: bool
    dirty_no: bool
    model_year: int
    accumulated_mileage: float

    def factor(self, pollutant):
        return getattr(self, pollutant)


Fleet = namedtuple('Fleet', ('orrs', 'im', 'truth'))


def _quantile_grid(n):
    return (np.arange(n) + 0.5) / n


def _body_values(u, median, sigma):
    return median * np.exp(sigma * stats.norm.ppf(u))


def _tail_values(u, q_splice, alpha):
    return q_splice * ((1.0 - TAIL_QUANTILE) / (1.0 - u)) ** (1.0 / alpha)


def _top_decile_share(values):
    ordered = np.sort(values)
    n_top = max(1, int(round(len(ordered) * 0.1)))
    return ordered[-n_top:].sum() / ordered.sum()


def _splice_point(median, sigma):
    return median * math.exp(sigma * stats.norm.ppf(TAIL_QUANTILE))


def _grid_builder(n, median, sigma):
    u = _quantile_grid(n)
    tail = u >= TAIL_QUANTILE
    body = _body_values(u[~tail], median, sigma)
    q_splice = _splice_point(median, sigma)
    return lambda alpha: np.concatenate([body, _tail_values(u[tail], q_splice, alpha)])


def tail_index(n, median, sigma, top_decile_share):
    grid = _grid_builder(n, median, sigma)

    def share_gap(alpha):
        return _top_decile_share(grid(alpha)) - top_decile_share

    lo, hi = ALPHA_BRACKET
    if share_gap(lo) < 0 or share_gap(hi) > 0:
        raise FleetSpecException(
            "top_decile_share {0} not reachable with body sigma {1}".format(top_decile_share, sigma)
        )
    return optimize.brentq(share_gap, lo, hi, xtol=1e-12)


def latent_factor_grid(n, median, sigma, top_decile_share):
    """Sorted latent factors on a midpoint quantile grid hitting ``top_decile_share``."""
    alpha = tail_index(n, median, sigma, top_decile_share)
    fleet_logger.debug("Tail index {0:.4f} for median {1}".format(alpha, median))
    return _grid_builder(n, median, sigma)(alpha)


def exceedance(median, sigma, alpha, standard):
    """Share of the spliced law lying above ``standard``."""
    q_splice = _splice_point(median, sigma)
    if standard <= q_splice:
        return float(stats.norm.sf(math.log(standard / median) / sigma))
    return (1.0 - TAIL_QUANTILE) * (q_splice / standard) ** alpha


def solve_body_sigma(n, median, standard, over_standard_share, top_decile_share):
    """Body spread at which ``over_standard_share`` of the factors exceed ``standard``.

    The tail index is re-solved for every candidate spread, so the dirtiest
    decile keeps carrying ``top_decile_share``. Spreads are searched up to the
    point where the body alone already carries that share.
    """
    def widest_gap(sigma):
        return _top_decile_share(_grid_builder(n, median, sigma)(ALPHA_BRACKET[1])) - top_decile_share

    if widest_gap(MIN_BODY_SIGMA) >= 0 or widest_gap(MAX_BODY_SIGMA) <= 0:
        raise FleetSpecException("top_decile_share {0} leaves no body spread to solve over".format(top_decile_share))
    hi = optimize.brentq(widest_gap, MIN_BODY_SIGMA, MAX_BODY_SIGMA, xtol=1e-9) - 1e-6

    def exceedance_gap(sigma):
        alpha = tail_index(n, median, sigma, top_decile_share)
        return exceedance(median, sigma, alpha, standard) - over_standard_share

    if exceedance_gap(MIN_BODY_SIGMA) > 0 or exceedance_gap(hi) < 0:
        raise FleetSpecException("over_standard_share {0} not reachable with median {1} and standard {2}".format(
            over_standard_share, median, standard
        ))
    return optimize.brentq(exceedance_gap, MIN_BODY_SIGMA, hi, xtol=1e-9)


def body_sigmas(spec):
    """Per-pollutant body spread: solved from ``over_standard_share`` when set, else ``body_sigma``."""
    if spec.over_standard_share is None:
        return {p: spec.body_sigma for p in POLLUTANTS}
    sigmas = {
        p: solve_body_sigma(
            spec.n_vehicles, spec.median(p), spec.standards.standard(p), spec.over_standard_share,
            spec.top_decile_share
        )
        for p in POLLUTANTS
    }
    fleet_logger.info("Body spread per pollutant for {0:.1%} over standard: {1}".format(
        spec.over_standard_share, ", ".join("{0}={1:.3f}".format(p, s) for p, s in sigmas.items())
    ))
    return sigmas


def _choice(rng, table):
    labels, weights = zip(*table)
    weights = np.asarray(weights, dtype=float)
    return labels[int(rng.choice(len(labels), p=weights / weights.sum()))]


def _draw_vehicle(rng, index):
    age = int(rng.integers(1, 16))
    model_year = REFERENCE_YEAR - age
    latest = date(REFERENCE_YEAR - 1, 1, 1) + timedelta(days=int(rng.integers(0, 365)))
    annual_km = float(rng.lognormal(math.log(15000.0), 0.35))
    capacity = _choice(rng, CAPACITIES)
    hp = max(40.0, float(rng.normal(65.0 * capacity, 10.0)))
    brand_weights = tuple(("BRAND_{0:02d}".format(k), 1.0 / k) for k in range(1, N_BRANDS + 1))
    return {
        "index": index,
        "vin": "LSYN{0:013d}".format(index),
        "plate": "ZA{0:06d}".format(index),
        "model_year": model_year,
        "latest_inspection": latest,
        "annual_km": annual_km,
        "n_inspections": 1 + min(int(rng.integers(0, 3)), latest.year - model_year),
        "capacity": capacity,
        "wheel_base": float(round(rng.normal(2650.0 + 150.0 * (capacity - 1.6), 90.0))),
        "maximum_horsepower": hp,
        "torsion": max(80.0, float(rng.normal(1.7 * hp + 20.0, 15.0))),
        "total_mass": max(900.0, float(rng.normal(1300.0 + 300.0 * capacity, 120.0))),
        "fuel_tank_capacity": max(35.0, float(rng.normal(45.0 + 6.0 * capacity, 4.0))),
        "vehicle_volume": max(6.0, float(rng.normal(10.0 + 1.5 * capacity, 0.8))),
        "press_ratio": float(np.clip(rng.normal(10.2, 0.6), 8.0, 13.0)),
        "engine_type": _choice(rng, ENGINE_TYPES),
        "vehicle_brand": _choice(rng, brand_weights),
        "fuel_type": _choice(rng, FUEL_TYPES),
        "home_site": SITES[int(rng.integers(0, len(SITES)))],
        "z_common": float(rng.normal()),
        "z_pollutant": rng.normal(size=len(POLLUTANTS)),
    }


def _mileage_at(vehicle, when):
    years = (when - date(vehicle["model_year"], 1, 1)).days / 365.25
    return vehicle["annual_km"] * max(years, 0.0)


def _max_acceleration(velocity_kmh, vsp_max):
    v = max(velocity_kmh * KMH_TO_MS, 1e-6)
    c = LIGHT_DUTY
    return ((vsp_max - c.a3 * v ** 3) / v - c.a2) / c.a1


def _draw_passes(rng, vehicle, spec, in_window):
    met = spec.met_regime
    count = 1 + int(rng.poisson(spec.orrs_records_per_vehicle - 1.0))
    passes = []
    limits = DEFAULT_WINDOW_LIMITS
    for _ in range(count):
        velocity = float(np.clip(rng.normal(42.0, 12.0), 5.0, 100.0))
        acceleration = float(np.clip(rng.normal(0.25, 0.5), -2.0, 3.0))
        temperature = float(min(rng.normal(met.temperature_mean, met.temperature_sd), 40.0))
        rh = float(np.clip(rng.normal(met.rh_mean, met.rh_sd), 5.0, 95.0))
        wind = float(rng.gamma(met.wind_shape, met.wind_scale))
        if in_window:
            temperature = float(np.clip(temperature, limits.t_low + 0.5, limits.t_high - 0.5))
            rh = min(rh, limits.rh_max - 1.0)
            wind = min(wind, limits.wind_max - 0.2)
            acceleration = min(acceleration, _max_acceleration(velocity, limits.vsp_max - 0.5))
        passes.append({
            "timestamp": date_to_timestamp(ORRS_START) + float(rng.uniform(0.0, SECONDS_PER_YEAR)),
            "velocity": velocity,
            "acceleration": acceleration,
            "temperature": temperature,
            "relative_humidity": rh,
            "wind_speed": wind,
            "pressure": float(rng.normal(met.pressure_mean, met.pressure_sd)),
            "site_id": vehicle["home_site"] if rng.uniform() < 0.8 else SITES[int(rng.integers(0, len(SITES)))],
            "z": rng.normal(size=len(POLLUTANTS)),
        })
    return passes


def noise_sigma(temperature, relative_humidity, wind_speed):
    return 0.08 + 0.003 * relative_humidity + 0.04 * wind_speed + 0.012 * abs(temperature - 20.0)


def met_bias(temperature, relative_humidity):
    return math.exp(-0.004 * (relative_humidity - 60.0) + 0.006 * (temperature - 20.0))


def engine_load(vsp):
    return (1.0 + LOAD_SLOPE * max(vsp, 0.0)) / (1.0 + LOAD_SLOPE * NOMINAL_VSP)


def _qc_violation(rng, p):
    if rng.uniform() < 0.5:
        p["relative_humidity"] = float(rng.uniform(95.5, 100.0))
    else:
        p["temperature"] = float(rng.uniform(40.5, 45.0))


def _window_violation(rng, p):
    kind = int(rng.integers(0, 3))
    if kind == 0:
        p["temperature"] = float(rng.uniform(32.5, 39.5))
    elif kind == 1:
        p["relative_humidity"] = float(rng.uniform(80.5, 94.5))
    else:
        p["wind_speed"] = float(rng.uniform(5.5, 9.0))


def _assign_factors(spec, vehicles, mileages):
    n = len(vehicles)
    log_mileage = np.log1p(np.asarray(mileages))
    z_age = (log_mileage - log_mileage.mean()) / (log_mileage.std() or 1.0)
    z_common = np.array([v["z_common"] for v in vehicles])
    w_common, w_age = 0.6, 0.35
    w_own = math.sqrt(1.0 - w_common ** 2 - w_age ** 2)
    sigmas = body_sigmas(spec)
    factors = {}
    for j, pollutant in enumerate(POLLUTANTS):
        grid = latent_factor_grid(n, spec.median(pollutant), sigmas[pollutant], spec.top_decile_share)
        score = w_common * z_common + w_age * z_age + w_own * np.array([v["z_pollutant"][j] for v in vehicles])
        order = np.argsort(score, kind="mergesort")
        assigned = np.empty(n)
        assigned[order] = grid
        factors[pollutant] = assigned
    return factors


def generate_fleet(spec):
    if not isinstance(spec, FleetSpec):
        raise FleetSpecException("generate_fleet expects a FleetSpec")
    in_window = spec.out_of_window_rate is not None

    vehicles, passes = [], []
    for i in range(spec.n_vehicles):
        rng = substream(spec.seed, i)
        vehicle = _draw_vehicle(rng, i)
        vehicles.append(vehicle)
        passes.extend((i, p) for p in _draw_passes(rng, vehicle, spec, in_window))

    mileages = [_mileage_at(v, v["latest_inspection"]) for v in vehicles]
    factors = _assign_factors(spec, vehicles, mileages)

    global_rng = substream(spec.seed, GLOBAL_STREAM)
    n_passes = len(passes)
    n_qc = int(round(spec.qc_violation_rate * n_passes))
    order = global_rng.permutation(n_passes)
    for k in order[:n_qc]:
        _qc_violation(global_rng, passes[k][1])
    if in_window:
        n_out = int(round(spec.out_of_window_rate * n_passes))
        for k in order[n_qc:n_out]:
            _window_violation(global_rng, passes[k][1])

    orrs = []
    for i, p in passes:
        vehicle = vehicles[i]
        vsp = compute_vsp(p["velocity"], p["acceleration"])
        sigma = noise_sigma(p["temperature"], p["relative_humidity"], p["wind_speed"])
        modulation = engine_load(vsp) * met_bias(p["temperature"], p["relative_humidity"])
        ratios = {
            pollutant: float(
                factors[pollutant][i] * spec.ratio_per_g_km(pollutant) * modulation * math.exp(sigma * p["z"][j])
            )
            for j, pollutant in enumerate(POLLUTANTS)
        }
        orrs.append(OrrsRecord(
            plate=vehicle["plate"], timestamp=p["timestamp"], rs_co=ratios["co"], rs_hc=ratios["hc"],
            rs_no=ratios["no"], velocity=p["velocity"], acceleration=p["acceleration"],
            temperature=p["temperature"], relative_humidity=p["relative_humidity"], wind_speed=p["wind_speed"],
            pressure=p["pressure"], site_id=p["site_id"]
        ))

    im, truth = [], []
    dirty = {
        pollutant: factors[pollutant] >= np.sort(factors[pollutant])[-max(1, int(round(0.1 * spec.n_vehicles)))]
        for pollutant in POLLUTANTS
    }
    for i, vehicle in enumerate(vehicles):
        rng = substream(spec.seed, i, 1)
        mileage_now = mileages[i]
        for k in range(vehicle["n_inspections"]):
            when = vehicle["latest_inspection"] - timedelta(days=365 * k)
            mileage = _mileage_at(vehicle, when)
            emissions = {}
            for pollutant in POLLUTANTS:
                aged = 1.0 - DETERIORATION_PER_10K_KM * (mileage_now - mileage) / 1e4
                emissions[pollutant] = float(
                    factors[pollutant][i] * max(aged, 0.2) * math.exp(IM_NOISE_SIGMA * rng.normal())
                )
            im.append(ImRecord(
                vin=vehicle["vin"], plate=vehicle["plate"], model_year=vehicle["model_year"],
                accumulated_mileage=mileage, capacity=vehicle["capacity"], wheel_base=vehicle["wheel_base"],
                maximum_horsepower=vehicle["maximum_horsepower"], torsion=vehicle["torsion"],
                total_mass=vehicle["total_mass"], fuel_tank_capacity=vehicle["fuel_tank_capacity"],
                vehicle_volume=vehicle["vehicle_volume"], press_ratio=vehicle["press_ratio"],
                engine_type=vehicle["engine_type"], vehicle_brand=vehicle["vehicle_brand"],
                fuel_type=vehicle["fuel_type"], im_co=emissions["co"], im_hc=emissions["hc"],
                im_no=emissions["no"], inspection_date=when
            ))
        truth.append(EmitterProfile(
            vin=vehicle["vin"], plate=vehicle["plate"],
            co=float(factors["co"][i]), hc=float(factors["hc"][i]), no=float(factors["no"][i]),
            deterioration_co=float(factors["co"][i] * DETERIORATION_PER_10K_KM),
            deterioration_hc=float(factors["hc"][i] * DETERIORATION_PER_10K_KM),
            deterioration_no=float(factors["no"][i] * DETERIORATION_PER_10K_KM),
            dirty_co=bool(dirty["co"][i]), dirty_hc=bool(dirty["hc"][i]), dirty_no=bool(dirty["no"][i]),
            model_year=vehicle["model_year"], accumulated_mileage=mileage_now
        ))

    orrs.sort(key=lambda r: (r.timestamp, r.plate))
    im.sort(key=lambda r: (r.vin, r.inspection_date))
    fleet_logger.info("Generated {0} vehicles, {1} ORRS records, {2} inspections (seed {3}).".format(
        spec.n_vehicles, len(orrs), len(im), spec.seed
    ))
    return Fleet(orrs, im, truth)


def corrupt_for_robustness(orrs, fraction, seed):
    """Push exactly round(fraction * n) records out of the meteorological window.

    Corrupted values stay inside the QC limits so only the window filter sees them.
    """
    if not 0 <= fraction <= 1:
        raise FleetSpecException("fraction must lie in [0, 1], got {0}".format(fraction))
    n = len(orrs)
    k = int(round(fraction * n))
    rng = np.random.default_rng(int(seed))
    chosen = rng.choice(n, size=k, replace=False) if k else []
    corrupted = list(orrs)
    for index in sorted(int(c) for c in chosen):
        p = {
            "temperature": orrs[index].temperature,
            "relative_humidity": orrs[index].relative_humidity,
            "wind_speed": orrs[index].wind_speed,
        }
        _window_violation(rng, p)
        corrupted[index] = replace(orrs[index], **p)
    return corrupted


class FleetFiles(object):
    ORRS = "orrs.jsonl"
    IM = "im.csv"
    TRUTH = "truth/emitter_profiles.jsonl"


def write_fleet(fleet, output_dir):
    paths = {
        "orrs": os.path.join(output_dir, FleetFiles.ORRS),
        "im": os.path.join(output_dir, FleetFiles.IM),
        "truth": os.path.join(output_dir, FleetFiles.TRUTH),
    }
    write_orrs(fleet.orrs, paths["orrs"])
    write_im(fleet.im, paths["im"])
    write_frame(pd.DataFrame([asdict(p) for p in fleet.truth]), paths["truth"])
    return paths
