import os

import pandas as pd
import pytest

from orrs_tools.cli.config import OUTPUT_DIR_ENV
from orrs_tools.cli.main import main
from orrs_tools.cli.manifest import MANIFEST_NAME
from orrs_tools.cli.pipeline import OutputFiles
from orrs_tools.data.records import POLLUTANTS
from orrs_tools.exceptions import ExitCodes
from orrs_tools.synth.fleet import FleetFiles
from orrs_tools.utils import read_json, file_sha256

from test_orrs_tools.test_cli.conftest import command_args


@pytest.fixture(scope="module")
def trained_dir(tmp_path_factory):
    output_dir = str(tmp_path_factory.mktemp("pipeline"))
    assert main(command_args("synth", output_dir)) == ExitCodes.SUCCESS.value
    assert main(command_args("train", output_dir)) == ExitCodes.SUCCESS.value
    return output_dir


def test_synth_is_deterministic(tmp_path):
    hashes = []
    for name in ("first", "second"):
        output_dir = str(tmp_path / name)
        assert main(command_args("synth", output_dir)) == ExitCodes.SUCCESS.value
        hashes.append([file_sha256(os.path.join(output_dir, f)) for f in (FleetFiles.ORRS, FleetFiles.IM)])
    assert hashes[0] == hashes[1]


def test_train_outputs(trained_dir):
    for name in (OutputFiles.MODEL, OutputFiles.ENCODERS, OutputFiles.CV_PLAN, OutputFiles.TEST_METRICS):
        assert os.path.exists(os.path.join(trained_dir, name))
    metrics = pd.read_csv(os.path.join(trained_dir, OutputFiles.METRICS))
    assert len(metrics) == len(POLLUTANTS) * 4
    assert set(metrics["model"]) == {"mlp", "forest", "gbt", "ensemble"}
    plan = read_json(os.path.join(trained_dir, OutputFiles.CV_PLAN))
    assert plan["plan"]["k"] == 3
    assert set(plan["test_vins"]).isdisjoint(plan["plan"]["fold_of"])


def test_screen_robustness_explain_report(trained_dir):
    for command in ("screen", "robustness", "explain", "report"):
        assert main(command_args(command, trained_dir)) == ExitCodes.SUCCESS.value

    proportions = read_json(os.path.join(trained_dir, OutputFiles.PROPORTIONS))
    assert sum(proportions.values()) == pytest.approx(1.0)
    policy = read_json(os.path.join(trained_dir, OutputFiles.THRESHOLDS))
    assert [e["pollutant"] for e in policy["thresholds"]] == list(POLLUTANTS)
    assert policy["provenance"]["dataset_hash"]

    robustness = pd.read_csv(os.path.join(trained_dir, OutputFiles.ROBUSTNESS))
    assert len(robustness) == 6
    assert len(pd.read_csv(os.path.join(trained_dir, OutputFiles.SWEEP))) == 18

    summary = pd.read_csv(os.path.join(trained_dir, OutputFiles.SHAPLEY_SUMMARY.format("co")))
    assert len(summary) == 25
    assert (summary["mas"] >= summary["ms"].abs()).all()
    assert not os.path.exists(os.path.join(trained_dir, OutputFiles.SHAPLEY_SUMMARY.format("hc")))

    report = read_json(os.path.join(trained_dir, OutputFiles.SUMMARY))
    assert len(report["top_factors"]["co"]) == 5
    manifest = read_json(os.path.join(trained_dir, MANIFEST_NAME))
    assert {"synth", "train", "screen", "robustness", "explain", "report"} <= set(manifest["stages"])
    for relative, digest in manifest["outputs"].items():
        assert file_sha256(os.path.join(trained_dir, relative)) == digest


def test_config_error_exit_code(tmp_path):
    args = command_args("synth", str(tmp_path), "learners.gbt.max_depth=9")
    assert main(args) == ExitCodes.CONFIG_ERROR.value


def test_missing_input_exit_code(tmp_path):
    args = command_args("train", str(tmp_path), "paths.orrs={0}".format(tmp_path / "absent.jsonl"))
    assert main(args) == ExitCodes.CONFIG_ERROR.value


@pytest.mark.parametrize("command", ["screen", "robustness", "explain", "report"])
def test_missing_artifacts_exit_code(tmp_path, command):
    assert main(command_args(command, str(tmp_path / "empty"))) == ExitCodes.IO_ERROR.value


def test_workers_flag(tmp_path):
    args = command_args("synth", str(tmp_path))
    args.workers = 2
    assert main(args) == ExitCodes.SUCCESS.value
    assert read_json(str(tmp_path / OutputFiles.CONFIG))["workers"] == 2


def test_pipeline_outputs_are_deterministic(tmp_path, monkeypatch):
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
    digests = []
    for name in ("first", "second"):
        workdir = tmp_path / name
        workdir.mkdir()
        monkeypatch.chdir(workdir)
        for command in ("synth", "train", "screen", "robustness", "explain"):
            assert main(command_args(command, "run")) == ExitCodes.SUCCESS.value
        manifest = read_json(os.path.join("run", MANIFEST_NAME))
        digests.append(manifest["outputs"])
    assert digests[0] == digests[1]
    assert OutputFiles.MODEL in digests[0]
    assert OutputFiles.THRESHOLDS in digests[0]
    assert OutputFiles.ROBUSTNESS in digests[0]
    assert OutputFiles.SHAPLEY_SUMMARY.format("co") in digests[0]
