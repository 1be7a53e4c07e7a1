import logging
from collections import namedtuple
from dataclasses import asdict

from orrs_tools.learn.exceptions import ModelFormatException
from orrs_tools.learn.forest import ForestModel, ForestConfig
from orrs_tools.learn.gbt import GbtModel, GbtConfig
from orrs_tools.learn.mlp import MlpModel, MlpConfig
from orrs_tools.utils import write_canonical_json, read_json


persistence_logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1

ModelKind = namedtuple('ModelKind', ('value', 'description', 'model_class', 'config_class'))


class ModelKinds(object):
    MLP = ModelKind(MlpModel.KIND, 'Fully connected network', MlpModel, MlpConfig)
    FOREST = ModelKind(ForestModel.KIND, 'Random forest', ForestModel, ForestConfig)
    GBT = ModelKind(GbtModel.KIND, 'Gradient-boosted trees', GbtModel, GbtConfig)

    _ALL_KINDS = [
        MLP, FOREST, GBT
    ]

    KIND_MAP = {
        K.value: K for K in _ALL_KINDS
    }


def encode_model(model, feature_schema_hash=None):
    """Self-describing document: a header (format, kind, config, schema hash, scaling) and a body."""
    if getattr(model, "KIND", None) not in ModelKinds.KIND_MAP:
        raise ModelFormatException("Can not encode object of type {0}".format(type(model).__name__))
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model.KIND,
        "config": asdict(model.config),
        "feature_schema_hash": feature_schema_hash,
        "n_features": model.n_features,
    }
    if hasattr(model, "standardization"):
        header["standardization"] = model.standardization()
    return {"header": header, "body": model.encode_body()}


def decode_model(document):
    try:
        header, body = document["header"], document["body"]
        kind = header["kind"]
    except (KeyError, TypeError):
        raise ModelFormatException("Model document lacks a header/body.")
    if header.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelFormatException("Unsupported model format version: {0}".format(header.get("format_version")))
    if kind not in ModelKinds.KIND_MAP:
        raise ModelFormatException("Unknown model kind: {0}".format(kind))
    model_kind = ModelKinds.KIND_MAP[kind]
    try:
        config = model_kind.config_class(**header["config"])
        return model_kind.model_class.decode_body(body, header, config)
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatException("Malformed {0} model document: {1}".format(kind, e))


def save_model(model, path, feature_schema_hash=None):
    write_canonical_json(path, encode_model(model, feature_schema_hash))
    persistence_logger.info("Wrote {0} model to {1}".format(model.KIND, path))


def load_model(path):
    return decode_model(read_json(path))
