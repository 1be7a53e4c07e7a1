import logging
import os
from dataclasses import asdict, fields

import pandas as pd

from orrs_tools.data.exceptions import InvalidRecordException
from orrs_tools.data.records import OrrsRecord, ImRecord, parse_date
from orrs_tools.utils import canonical_json


io_logger = logging.getLogger(__name__)

ORRS_COLUMNS = tuple(f.name for f in fields(OrrsRecord))
IM_COLUMNS = tuple(f.name for f in fields(ImRecord))

_STRING_COLUMNS = {
    "plate": str, "site_id": str, "vin": str, "engine_type": str, "vehicle_brand": str, "fuel_type": str,
    "inspection_date": str
}

JSON_LINES_SUFFIXES = (".jsonl", ".json", ".ndjson")


def _is_json_lines(path):
    return str(path).lower().endswith(JSON_LINES_SUFFIXES)


def _require_columns(frame, columns, path):
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise InvalidRecordException("{0} is missing columns: {1}".format(path, ", ".join(missing)))


def _read_frame(path, columns):
    dtypes = {c: t for c, t in _STRING_COLUMNS.items() if c in columns}
    if _is_json_lines(path):
        frame = pd.read_json(path, lines=True, dtype=dtypes, convert_dates=False, precise_float=True)
    else:
        frame = pd.read_csv(
            path, dtype=dtypes, keep_default_na=False, na_values=[""], float_precision="round_trip"
        )
    _require_columns(frame, columns, path)
    return frame


def read_orrs(path):
    frame = _read_frame(path, ORRS_COLUMNS)
    records = [
        OrrsRecord(
            plate=row.plate, timestamp=float(row.timestamp), rs_co=float(row.rs_co), rs_hc=float(row.rs_hc),
            rs_no=float(row.rs_no), velocity=float(row.velocity), acceleration=float(row.acceleration),
            temperature=float(row.temperature), relative_humidity=float(row.relative_humidity),
            wind_speed=float(row.wind_speed), pressure=float(row.pressure), site_id=row.site_id
        )
        for row in frame.itertuples(index=False)
    ]
    io_logger.info("Read {0} ORRS records from {1}".format(len(records), path))
    return records


def read_im(path):
    frame = _read_frame(path, IM_COLUMNS)
    records = [
        ImRecord(
            vin=row.vin, plate=row.plate, model_year=int(row.model_year),
            accumulated_mileage=float(row.accumulated_mileage), capacity=float(row.capacity),
            wheel_base=float(row.wheel_base), maximum_horsepower=float(row.maximum_horsepower),
            torsion=float(row.torsion), total_mass=float(row.total_mass),
            fuel_tank_capacity=float(row.fuel_tank_capacity), vehicle_volume=float(row.vehicle_volume),
            press_ratio=float(row.press_ratio), engine_type=row.engine_type, vehicle_brand=row.vehicle_brand,
            fuel_type=row.fuel_type, im_co=float(row.im_co), im_hc=float(row.im_hc), im_no=float(row.im_no),
            inspection_date=parse_date(row.inspection_date)
        )
        for row in frame.itertuples(index=False)
    ]
    io_logger.info("Read {0} I/M records from {1}".format(len(records), path))
    return records


def records_to_frame(records, columns):
    frame = pd.DataFrame([asdict(r) for r in records], columns=list(columns))
    if "inspection_date" in frame.columns:
        frame["inspection_date"] = frame["inspection_date"].map(lambda d: d.isoformat())
    return frame


def write_frame(frame, path):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    if _is_json_lines(path):
        # one canonical JSON object per line; floats keep their shortest round-trip repr
        with open(path, "w", encoding="utf-8") as f:
            for row in frame.to_dict(orient="records"):
                f.write(canonical_json(row))
                f.write("\n")
    else:
        frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")


def write_orrs(records, path):
    write_frame(records_to_frame(records, ORRS_COLUMNS), path)


def write_im(records, path):
    write_frame(records_to_frame(records, IM_COLUMNS), path)
