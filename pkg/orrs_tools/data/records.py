import calendar
import math
from dataclasses import dataclass, fields
from datetime import date, datetime, timezone
from typing import Optional

from orrs_tools.data.exceptions import InvalidRecordException


POLLUTANTS = ("co", "hc", "no")


def normalize_plate(plate):
    return str(plate).strip().upper()


def date_to_timestamp(d):
    """UTC midnight of a calendar date, in seconds."""
    return float(calendar.timegm(d.timetuple()))


def timestamp_to_datetime(ts):
    return datetime.fromtimestamp(ts, tz=timezone.utc)


def _check_finite(record, names):
    for name in names:
        value = getattr(record, name)
        if value is None or not math.isfinite(value):
            raise InvalidRecordException("{0}.{1} must be finite, got {2}".format(
                type(record).__name__, name, value
            ))


@dataclass(frozen=True)
class OrrsRecord(object):
    plate: str
    timestamp: float
    rs_co: float
    rs_hc: float
    rs_no: float
    velocity: float
    acceleration: float
    temperature: float
    relative_humidity: float
    wind_speed: float
    pressure: float
    site_id: str

    NUMERIC_FIELDS = (
        "timestamp", "rs_co", "rs_hc", "rs_no", "velocity", "acceleration",
        "temperature", "relative_humidity", "wind_speed", "pressure"
    )

    def __post_init__(self):
        _check_finite(self, self.NUMERIC_FIELDS)
        if min(self.rs_co, self.rs_hc, self.rs_no) < 0:
            raise InvalidRecordException("Negative remote sensing ratio for plate {0}".format(self.plate))
        if self.velocity < 0:
            raise InvalidRecordException("Negative velocity for plate {0}".format(self.plate))
        if not 0 <= self.relative_humidity <= 100:
            raise InvalidRecordException(
                "Relative humidity out of [0, 100] for plate {0}: {1}".format(self.plate, self.relative_humidity)
            )
        if self.pressure <= 0:
            raise InvalidRecordException("Non-positive pressure for plate {0}".format(self.plate))

    def ratio(self, pollutant):
        return getattr(self, "rs_" + pollutant)

    @property
    def hour_of_day(self):
        return timestamp_to_datetime(self.timestamp).hour


@dataclass(frozen=True)
class ImRecord(object):
    vin: str
    plate: str
    model_year: int
    accumulated_mileage: float
    capacity: float
    wheel_base: float
    maximum_horsepower: float
    torsion: float
    total_mass: float
    fuel_tank_capacity: float
    vehicle_volume: float
    press_ratio: float
    engine_type: str
    vehicle_brand: str
    fuel_type: str
    im_co: float
    im_hc: float
    im_no: float
    inspection_date: date

    NUMERIC_FIELDS = (
        "model_year", "accumulated_mileage", "capacity", "wheel_base", "maximum_horsepower", "torsion",
        "total_mass", "fuel_tank_capacity", "vehicle_volume", "press_ratio", "im_co", "im_hc", "im_no"
    )

    def __post_init__(self):
        _check_finite(self, ("im_co", "im_hc", "im_no", "accumulated_mileage"))
        if min(self.im_co, self.im_hc, self.im_no) < 0:
            raise InvalidRecordException("Negative I/M emission for vin {0}".format(self.vin))
        if self.accumulated_mileage < 0:
            raise InvalidRecordException("Negative accumulated mileage for vin {0}".format(self.vin))
        if self.model_year is not None and self.model_year > self.inspection_date.year:
            raise InvalidRecordException("Model year {0} after inspection year {1} for vin {2}".format(
                self.model_year, self.inspection_date.year, self.vin
            ))

    def emission(self, pollutant):
        return getattr(self, "im_" + pollutant)

    @property
    def inspection_timestamp(self):
        return date_to_timestamp(self.inspection_date)


@dataclass(frozen=True)
class MatchedSample(object):
    orrs: OrrsRecord
    im: ImRecord
    vsp: float
    fallback: bool = False

    def __post_init__(self):
        if normalize_plate(self.orrs.plate) != normalize_plate(self.im.plate):
            raise InvalidRecordException("Plate mismatch: {0} vs {1}".format(self.orrs.plate, self.im.plate))
        if not math.isfinite(self.vsp):
            raise InvalidRecordException("Non-finite VSP for plate {0}".format(self.orrs.plate))

    @property
    def vin(self):
        return self.im.vin

    def target(self, pollutant):
        return self.im.emission(pollutant)


@dataclass(frozen=True)
class QcPolicy(object):
    max_relative_humidity: float = 95.0
    max_temperature: float = 40.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidRecordException("QcPolicy.{0} must be finite and positive".format(f.name))

    def violates(self, record):
        return record.relative_humidity > self.max_relative_humidity or record.temperature > self.max_temperature


@dataclass(frozen=True)
class UnmatchedRecord(object):
    orrs: OrrsRecord
    reason: str


class UnmatchedReasons(object):
    NO_REGISTRY_ENTRY = "no-registry-entry"
    EMPTY_PLATE = "empty-plate"


def parse_date(value) -> Optional[date]:
    if isinstance(value, datetime):
        return value.date()
    elif isinstance(value, date):
        return value
    return date.fromisoformat(str(value)[:10])
