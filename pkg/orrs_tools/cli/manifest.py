import logging
import os
import platform

import joblib
import numpy
import pandas
import pydantic
import scipy
import yaml

from orrs_tools import VERSION
from orrs_tools.utils import file_sha256, read_json, write_canonical_json


manifest_logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT_VERSION = 1


def component_versions():
    return {
        "orrs_tools": VERSION,
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "pandas": pandas.__version__,
        "scipy": scipy.__version__,
        "joblib": joblib.__version__,
        "pydantic": pydantic.VERSION,
        "pyyaml": yaml.__version__,
    }


def output_inventory(output_dir):
    """Relative path -> sha256 for every file under output_dir except the manifest itself."""
    inventory = {}
    for root, dirs, files in os.walk(output_dir):
        dirs.sort()
        for name in sorted(files):
            path = os.path.join(root, name)
            relative = os.path.relpath(path, output_dir).replace(os.sep, "/")
            if relative != MANIFEST_NAME:
                inventory[relative] = file_sha256(path)
    return inventory


class RunManifest(object):
    def __init__(self, config_hash=None, inputs=None, stages=None, outputs=None, versions=None):
        self.config_hash = config_hash
        self.inputs = dict(inputs or {})
        self.stages = dict(stages or {})
        self.outputs = dict(outputs or {})
        self.versions = dict(versions or component_versions())

    def __repr__(self):
        return "RunManifest(config={0}, stages={1}, outputs={2})".format(
            (self.config_hash or "")[:12], sorted(self.stages), len(self.outputs)
        )

    def record_stage(self, name, seconds):
        self.stages[name] = float(seconds)

    def record_input(self, name, path):
        self.inputs[name] = {"path": os.path.abspath(path), "sha256": file_sha256(path)}

    def to_document(self):
        return {
            "format_version": MANIFEST_FORMAT_VERSION,
            "config_hash": self.config_hash,
            "inputs": self.inputs,
            "stages": self.stages,
            "outputs": self.outputs,
            "versions": self.versions,
        }

    @classmethod
    def from_document(cls, doc):
        return cls(doc.get("config_hash"), doc.get("inputs"), doc.get("stages"), doc.get("outputs"))

    @classmethod
    def load_or_new(cls, output_dir, config_hash):
        path = os.path.join(output_dir, MANIFEST_NAME)
        manifest = cls.from_document(read_json(path)) if os.path.exists(path) else cls()
        manifest.config_hash = config_hash
        return manifest

    def write(self, output_dir):
        self.outputs = output_inventory(output_dir)
        path = os.path.join(output_dir, MANIFEST_NAME)
        write_canonical_json(path, self.to_document())
        manifest_logger.info("Manifest lists {0} files in {1}".format(len(self.outputs), output_dir))
        return path
