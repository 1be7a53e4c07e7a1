from datetime import date

import pytest

from orrs_tools.data.records import OrrsRecord, ImRecord, MatchedSample, QcPolicy, date_to_timestamp
from orrs_tools.data.vsp import compute_vsp


def make_orrs(plate="ZJ-A1234", timestamp=None, **overrides):
    values = dict(
        plate=plate, timestamp=timestamp if timestamp is not None else date_to_timestamp(date(2020, 6, 1)) + 3600,
        rs_co=0.01, rs_hc=0.0005, rs_no=0.001, velocity=40.0, acceleration=0.5, temperature=20.0,
        relative_humidity=50.0, wind_speed=2.0, pressure=101.3, site_id="SITE_A"
    )
    values.update(overrides)
    return OrrsRecord(**values)


def make_im(vin="VIN0001", plate="ZJ-A1234", inspection_date=date(2020, 1, 15), **overrides):
    values = dict(
        vin=vin, plate=plate, model_year=2012, accumulated_mileage=85000.0, capacity=1.6, wheel_base=2650.0,
        maximum_horsepower=90.0, torsion=155.0, total_mass=1500.0, fuel_tank_capacity=50.0, vehicle_volume=11.5,
        press_ratio=10.5, engine_type="NA", vehicle_brand="BRAND_03", fuel_type="GASOLINE_92", im_co=1.2,
        im_hc=0.15, im_no=0.3, inspection_date=inspection_date
    )
    values.update(overrides)
    return ImRecord(**values)


def make_sample(orrs=None, im=None):
    orrs = orrs or make_orrs()
    im = im or make_im(plate=orrs.plate)
    return MatchedSample(orrs, im, compute_vsp(orrs.velocity, orrs.acceleration))


@pytest.fixture
def orrs_record():
    return make_orrs()


@pytest.fixture
def im_record():
    return make_im()


@pytest.fixture
def qc_policy():
    return QcPolicy()


@pytest.fixture
def samples():
    result = []
    for i, (engine, brand) in enumerate([("NA", "BRAND_01"), ("TURBO", "BRAND_02"), ("NA", "BRAND_02")]):
        plate = "ZJ-B{0:04d}".format(i)
        result.append(make_sample(
            make_orrs(plate=plate, velocity=30.0 + i, rs_co=0.01 * (i + 1)),
            make_im(vin="VIN{0:04d}".format(i), plate=plate, engine_type=engine, vehicle_brand=brand)
        ))
    return result
