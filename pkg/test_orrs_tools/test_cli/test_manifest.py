import os

from orrs_tools.cli.manifest import RunManifest, output_inventory, component_versions, MANIFEST_NAME
from orrs_tools.utils import file_sha256, read_json


def test_inventory_skips_the_manifest(tmp_path):
    (tmp_path / "nested").mkdir()
    (tmp_path / "a.csv").write_text("x\n1\n")
    (tmp_path / "nested" / "b.json").write_text("{}")
    (tmp_path / MANIFEST_NAME).write_text("{}")
    inventory = output_inventory(str(tmp_path))
    assert sorted(inventory) == ["a.csv", "nested/b.json"]
    assert inventory["a.csv"] == file_sha256(str(tmp_path / "a.csv"))


def test_manifest_accumulates_across_commands(tmp_path):
    (tmp_path / "input.csv").write_text("plate\nA\n")
    first = RunManifest.load_or_new(str(tmp_path), "hash-1")
    first.record_stage("synth", 1.5)
    first.record_input("orrs", str(tmp_path / "input.csv"))
    first.write(str(tmp_path))

    second = RunManifest.load_or_new(str(tmp_path), "hash-2")
    second.record_stage("train", 2.0)
    path = second.write(str(tmp_path))
    doc = read_json(path)
    assert doc["config_hash"] == "hash-2"
    assert doc["stages"] == {"synth": 1.5, "train": 2.0}
    assert doc["inputs"]["orrs"]["sha256"] == file_sha256(str(tmp_path / "input.csv"))
    assert "input.csv" in doc["outputs"]
    assert os.path.basename(path) == MANIFEST_NAME


def test_versions():
    versions = component_versions()
    assert versions["orrs_tools"] == "0.1.0"
    assert {"numpy", "pandas", "scipy", "joblib", "pydantic", "pyyaml", "python"} <= set(versions)
