import logging
import math
from collections import namedtuple

import numpy as np

from orrs_tools.data.exceptions import FeatureAssemblyException, SchemaMismatchException
from orrs_tools.utils import canonical_hash


features_logger = logging.getLogger(__name__)

FEATURE_SCHEMA_VERSION = 1
UNKNOWN_CODE = 0

FeatureSource = namedtuple('FeatureSource', ('name', 'getter', 'categorical'))


def _orrs(name):
    return lambda sample: getattr(sample.orrs, name)


def _im(name):
    return lambda sample: getattr(sample.im, name)


class KnownFeatures(object):
    RS_CO = FeatureSource("rs_co", _orrs("rs_co"), False)
    RS_HC = FeatureSource("rs_hc", _orrs("rs_hc"), False)
    RS_NO = FeatureSource("rs_no", _orrs("rs_no"), False)
    VELOCITY = FeatureSource("velocity", _orrs("velocity"), False)
    ACCELERATION = FeatureSource("acceleration", _orrs("acceleration"), False)
    VSP = FeatureSource("vsp", lambda sample: sample.vsp, False)
    TEMPERATURE = FeatureSource("temperature", _orrs("temperature"), False)
    RELATIVE_HUMIDITY = FeatureSource("relative_humidity", _orrs("relative_humidity"), False)
    WIND_SPEED = FeatureSource("wind_speed", _orrs("wind_speed"), False)
    PRESSURE = FeatureSource("pressure", _orrs("pressure"), False)
    MODEL_YEAR = FeatureSource("model_year", _im("model_year"), False)
    ACCUMULATED_MILEAGE = FeatureSource("accumulated_mileage", _im("accumulated_mileage"), False)
    CAPACITY = FeatureSource("capacity", _im("capacity"), False)
    WHEEL_BASE = FeatureSource("wheel_base", _im("wheel_base"), False)
    MAXIMUM_HORSEPOWER = FeatureSource("maximum_horsepower", _im("maximum_horsepower"), False)
    TORSION = FeatureSource("torsion", _im("torsion"), False)
    TOTAL_MASS = FeatureSource("total_mass", _im("total_mass"), False)
    FUEL_TANK_CAPACITY = FeatureSource("fuel_tank_capacity", _im("fuel_tank_capacity"), False)
    VEHICLE_VOLUME = FeatureSource("vehicle_volume", _im("vehicle_volume"), False)
    PRESS_RATIO = FeatureSource("press_ratio", _im("press_ratio"), False)
    ENGINE_TYPE = FeatureSource("engine_type", _im("engine_type"), True)
    VEHICLE_BRAND = FeatureSource("vehicle_brand", _im("vehicle_brand"), True)
    FUEL_TYPE = FeatureSource("fuel_type", _im("fuel_type"), True)
    SITE_ID = FeatureSource("site_id", _orrs("site_id"), True)
    HOUR_OF_DAY = FeatureSource("hour_of_day", lambda sample: sample.orrs.hour_of_day, False)

    _ALL_FEATURES = [
        RS_CO, RS_HC, RS_NO, VELOCITY, ACCELERATION, VSP, TEMPERATURE, RELATIVE_HUMIDITY, WIND_SPEED,
        PRESSURE, MODEL_YEAR, ACCUMULATED_MILEAGE, CAPACITY, WHEEL_BASE, MAXIMUM_HORSEPOWER, TORSION,
        TOTAL_MASS, FUEL_TANK_CAPACITY, VEHICLE_VOLUME, PRESS_RATIO, ENGINE_TYPE, VEHICLE_BRAND, FUEL_TYPE,
        SITE_ID, HOUR_OF_DAY
    ]

    FEATURE_MAP = {
        f.name: f for f in _ALL_FEATURES
    }


DEFAULT_FEATURES = tuple(f.name for f in KnownFeatures._ALL_FEATURES)


class FeatureSchema(object):
    """Ordered feature composition; the hash ties trained models to it."""

    def __init__(self, names=DEFAULT_FEATURES, version=FEATURE_SCHEMA_VERSION):
        unknown = [n for n in names if n not in KnownFeatures.FEATURE_MAP]
        if unknown:
            raise SchemaMismatchException("Unknown features in schema: {0}".format(unknown))
        if len(set(names)) != len(names):
            raise SchemaMismatchException("Duplicate features in schema.")
        self.names = tuple(names)
        self.version = version

    def __repr__(self):
        return "FeatureSchema(version={0}, n={1}, hash={2})".format(self.version, len(self), self.hash[:12])

    def __len__(self):
        return len(self.names)

    def __eq__(self, other):
        return isinstance(other, FeatureSchema) and self.hash == other.hash

    def __hash__(self):
        return hash(self.hash)

    @property
    def categorical(self):
        return tuple(n for n in self.names if KnownFeatures.FEATURE_MAP[n].categorical)

    @property
    def categorical_indices(self):
        return tuple(i for i, n in enumerate(self.names) if KnownFeatures.FEATURE_MAP[n].categorical)

    def index(self, name):
        return self.names.index(name)

    @property
    def hash(self):
        return canonical_hash(self.to_document())

    def to_document(self):
        return {"version": self.version, "names": list(self.names)}

    @classmethod
    def from_document(cls, doc):
        return cls(tuple(doc["names"]), doc["version"])


class CategoricalEncoder(object):
    """Label -> integer code table; code 0 is reserved for unseen labels."""

    def __init__(self, field, table=None):
        self.field = field
        self.table = dict(table or {})
        if UNKNOWN_CODE in self.table.values():
            raise SchemaMismatchException("Code {0} is reserved for unknown labels.".format(UNKNOWN_CODE))
        self._inverse = {v: k for k, v in self.table.items()}

    def __repr__(self):
        return "CategoricalEncoder(field={0}, levels={1})".format(self.field, len(self.table))

    @classmethod
    def fit(cls, field, labels):
        return cls(field, {label: i + 1 for i, label in enumerate(sorted({str(l) for l in labels}))})

    @property
    def n_levels(self):
        # unknown code included
        return len(self.table) + 1

    def encode(self, label):
        code = self.table.get(str(label))
        if code is None:
            features_logger.warning("Unseen {0} label {1!r}; using reserved unknown code.".format(self.field, label))
            return UNKNOWN_CODE
        return code

    def decode(self, code):
        return self._inverse.get(int(code))


class EncoderSet(object):
    def __init__(self, encoders):
        self.encoders = {e.field: e for e in encoders}

    def __getitem__(self, field):
        return self.encoders[field]

    def __contains__(self, field):
        return field in self.encoders

    @classmethod
    def fit(cls, samples, schema=None):
        schema = schema or FeatureSchema()
        return cls([
            CategoricalEncoder.fit(name, (KnownFeatures.FEATURE_MAP[name].getter(s) for s in samples))
            for name in schema.categorical
        ])

    def categorical_levels(self, schema):
        """Column index -> number of codes, as the MLP one-hot expansion expects."""
        return {schema.index(name): self.encoders[name].n_levels for name in schema.categorical}

    def to_document(self):
        return {field: dict(sorted(e.table.items())) for field, e in sorted(self.encoders.items())}

    @classmethod
    def from_document(cls, doc):
        return cls([CategoricalEncoder(field, table) for field, table in doc.items()])


class FeatureVector(object):
    def __init__(self, values, schema):
        self.values = np.asarray(values, dtype=float)
        self.schema = schema
        if self.values.shape != (len(schema),):
            raise SchemaMismatchException("Feature vector length {0} does not match schema length {1}".format(
                self.values.shape, len(schema)
            ))

    def __repr__(self):
        return "FeatureVector({0})".format(", ".join(
            "{0}={1}".format(n, v) for n, v in zip(self.schema.names, self.values)
        ))

    def __len__(self):
        return len(self.values)

    def __getitem__(self, name):
        return self.values[self.schema.index(name)]

    def as_dict(self):
        return dict(zip(self.schema.names, self.values.tolist()))

    def decode_categoricals(self, encoders):
        return {name: encoders[name].decode(self[name]) for name in self.schema.categorical}


def build_features(sample, encoders, schema=None):
    schema = schema or FeatureSchema()
    values = []
    for name in schema.names:
        source = KnownFeatures.FEATURE_MAP[name]
        raw = source.getter(sample)
        if source.categorical:
            if name not in encoders:
                raise FeatureAssemblyException(name, "No encoder table for categorical field: {0}".format(name))
            values.append(float(encoders[name].encode(raw)))
            continue
        if raw is None:
            raise FeatureAssemblyException(name)
        value = float(raw)
        if not math.isfinite(value):
            raise FeatureAssemblyException(name)
        values.append(value)
    return FeatureVector(values, schema)


def build_feature_matrix(samples, encoders, schema=None):
    schema = schema or FeatureSchema()
    if not samples:
        return np.empty((0, len(schema)))
    return np.vstack([build_features(s, encoders, schema).values for s in samples])
