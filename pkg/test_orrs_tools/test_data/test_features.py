import numpy as np
import pytest

from orrs_tools.data.exceptions import FeatureAssemblyException, SchemaMismatchException
from orrs_tools.data.features import FeatureSchema, EncoderSet, CategoricalEncoder, build_features, \
    build_feature_matrix, DEFAULT_FEATURES, UNKNOWN_CODE
from orrs_tools.data.records import MatchedSample

from test_orrs_tools.test_data.conftest import make_orrs, make_im, make_sample


def test_default_schema_arity(samples):
    encoders = EncoderSet.fit(samples)
    vector = build_features(samples[0], encoders)
    assert len(DEFAULT_FEATURES) == 25
    assert len(vector) == 25
    assert vector["rs_co"] == samples[0].orrs.rs_co
    assert vector["vsp"] == samples[0].vsp


def test_identical_samples_identical_vectors(samples):
    encoders = EncoderSet.fit(samples)
    first = build_features(samples[1], encoders)
    second = build_features(make_sample(samples[1].orrs, samples[1].im), encoders)
    assert np.array_equal(first.values, second.values)


def test_unseen_category_gets_reserved_code(samples, caplog):
    encoders = EncoderSet.fit(samples)
    stranger = make_sample(make_orrs(plate="NEW"), make_im(plate="NEW", vehicle_brand="NEVER_SEEN"))
    vector = build_features(stranger, encoders)
    assert vector["vehicle_brand"] == UNKNOWN_CODE
    assert "NEVER_SEEN" in caplog.text


def test_categorical_round_trip(samples):
    encoders = EncoderSet.fit(samples)
    for sample in samples:
        decoded = build_features(sample, encoders).decode_categoricals(encoders)
        assert decoded == {
            "engine_type": sample.im.engine_type, "vehicle_brand": sample.im.vehicle_brand,
            "fuel_type": sample.im.fuel_type, "site_id": sample.orrs.site_id,
        }


def test_encoder_codes_are_sorted_and_skip_unknown():
    encoder = CategoricalEncoder.fit("engine_type", ["TURBO", "NA", "NA", "HYBRID"])
    assert encoder.table == {"HYBRID": 1, "NA": 2, "TURBO": 3}
    assert encoder.n_levels == 4
    with pytest.raises(SchemaMismatchException):
        CategoricalEncoder("engine_type", {"NA": UNKNOWN_CODE})


def test_encoder_document_round_trip(samples):
    encoders = EncoderSet.fit(samples)
    restored = EncoderSet.from_document(encoders.to_document())
    assert restored.to_document() == encoders.to_document()
    schema = FeatureSchema()
    assert np.array_equal(build_feature_matrix(samples, restored, schema), build_feature_matrix(samples, encoders, schema))


def test_missing_numeric_field_names_it(samples):
    encoders = EncoderSet.fit(samples)
    sample = make_sample()
    broken = MatchedSample(sample.orrs, make_im(model_year=None), sample.vsp)
    with pytest.raises(FeatureAssemblyException) as exc_info:
        build_features(broken, encoders)
    assert exc_info.value.field == "model_year"
    assert "model_year" in str(exc_info.value)


def test_missing_encoder_table(samples):
    schema = FeatureSchema(("rs_co", "engine_type"))
    with pytest.raises(FeatureAssemblyException) as exc_info:
        build_features(samples[0], EncoderSet([]), schema)
    assert exc_info.value.field == "engine_type"


def test_schema_hash_tracks_composition():
    full = FeatureSchema()
    assert full.hash == FeatureSchema().hash
    assert full == FeatureSchema.from_document(full.to_document())
    reduced = FeatureSchema(DEFAULT_FEATURES[:-1])
    assert reduced.hash != full.hash
    assert full.categorical == ("engine_type", "vehicle_brand", "fuel_type", "site_id")
    assert full.categorical_indices == tuple(full.index(n) for n in full.categorical)


@pytest.mark.parametrize("names", [("rs_co", "not_a_feature"), ("rs_co", "rs_co")])
def test_bad_schema(names):
    with pytest.raises(SchemaMismatchException):
        FeatureSchema(names)


def test_feature_matrix_shape(samples):
    encoders = EncoderSet.fit(samples)
    X = build_feature_matrix(samples, encoders)
    assert X.shape == (3, 25)
    assert build_feature_matrix([], encoders).shape == (0, 25)


def test_categorical_levels(samples):
    encoders = EncoderSet.fit(samples)
    schema = FeatureSchema()
    levels = encoders.categorical_levels(schema)
    assert levels[schema.index("engine_type")] == 3
    assert levels[schema.index("vehicle_brand")] == 3
    assert levels[schema.index("site_id")] == 2
