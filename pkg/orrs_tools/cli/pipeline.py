import logging
import os
import time
from collections import namedtuple
from contextlib import contextmanager

import numpy as np
import pandas as pd

from orrs_tools.cli.exceptions import MissingArtifactException
from orrs_tools.cli.manifest import RunManifest
from orrs_tools.data.exceptions import EmptyDatasetException
from orrs_tools.data.features import build_feature_matrix, EncoderSet, FeatureSchema
from orrs_tools.data.io import read_orrs, read_im, write_frame
from orrs_tools.data.matching import apply_qc, match_records
from orrs_tools.data.records import POLLUTANTS
from orrs_tools.ensemble.cv import make_cv_plan, holdout_split
from orrs_tools.ensemble.metrics import compute_metrics, metrics_row, binned_metrics, METRICS_COLUMNS, \
    DEFAULT_BINNED_FEATURES
from orrs_tools.ensemble.stacking import TrainingSet, BaseConfigs, BASE_LEARNERS, PollutantPredictor, \
    generate_oof_predictions, fit_stacked, cross_validated_predictions, train_base_learner, save_stacked, load_stacked
from orrs_tools.interpret.exceptions import ShapleyException
from orrs_tools.interpret.shapley import explain_samples, select_background
from orrs_tools.learn.search import HyperGrid, grid_search
from orrs_tools.screening.classify import classify_fleet, aggregate_by_vin, thresholds_to_document
from orrs_tools.screening.curves import over_standard_rate_curve, find_thresholds
from orrs_tools.screening.robustness import ScreeningDataset, monte_carlo_thresholds, sample_size_sweep, \
    thresholds_by_group
from orrs_tools.screening.window import apply_met_window
from orrs_tools.synth.fleet import generate_fleet, corrupt_for_robustness, write_fleet, FleetFiles
from orrs_tools.utils import canonical_hash, canonical_json, substream, write_canonical_json, read_json


pipeline_logger = logging.getLogger(__name__)

EXPLAIN_STREAM = 13
ENSEMBLE = "ensemble"


class OutputFiles(object):
    CONFIG = "config.json"
    MODEL = "model.json"
    ENCODERS = "encoders.json"
    CV_PLAN = "cv_plan.json"
    GRID_SCORES = "grid_scores.csv"
    METRICS = "metrics.csv"
    TEST_METRICS = "test_metrics.csv"
    BINNED_METRICS = "binned_metrics.csv"
    THRESHOLDS = "thresholds.json"
    CLASSIFICATION = "classification.csv"
    PROPORTIONS = "fleet_proportions.json"
    RATE_CURVE = "rate_curve_{0}.csv"
    ROBUSTNESS = "robustness.csv"
    ROBUSTNESS_SAMPLES = "robustness_samples.csv"
    SWEEP = "sweep.csv"
    SWEEP_KNEES = "sweep_knees.csv"
    THRESHOLDS_BY = "thresholds_by_{0}.csv"
    SHAPLEY = "shapley_{0}.csv"
    SHAPLEY_SUMMARY = "shapley_summary_{0}.csv"
    SUMMARY = "summary.json"


ScreeningFrame = namedtuple('ScreeningFrame', ('vins', 'dataset', 'covariates'))


class PipelineRun(object):
    """Output directory, manifest and stage timing shared by one command invocation."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.output_dir = cfg.output_dir
        os.makedirs(self.output_dir, exist_ok=True)
        self.manifest = RunManifest.load_or_new(self.output_dir, cfg.hash)
        self.written = []

    def path(self, name):
        return os.path.join(self.output_dir, name)

    @contextmanager
    def stage(self, name):
        started = time.time()
        pipeline_logger.info("Stage {0} started".format(name))
        yield
        seconds = time.time() - started
        self.manifest.record_stage(name, seconds)
        pipeline_logger.info("Stage {0} finished in {1:.2f}s".format(name, seconds))

    def write_rows(self, name, rows, columns):
        path = self.path(name)
        write_frame(pd.DataFrame(list(rows), columns=list(columns)), path)
        self.written.append(path)
        return path

    def write_json(self, name, document):
        path = self.path(name)
        write_canonical_json(path, document)
        self.written.append(path)
        return path

    def finish(self):
        self.write_json(OutputFiles.CONFIG, self.cfg.model_dump(mode="json"))
        self.manifest.write(self.output_dir)
        return self.written

    @property
    def dataset_hash(self):
        return canonical_hash({k: v["sha256"] for k, v in sorted(self.manifest.inputs.items())})


def input_paths(cfg):
    return (
        cfg.paths.orrs or os.path.join(cfg.output_dir, FleetFiles.ORRS),
        cfg.paths.im or os.path.join(cfg.output_dir, FleetFiles.IM),
    )


def model_path(cfg):
    return cfg.paths.model or os.path.join(cfg.output_dir, OutputFiles.MODEL)


def load_samples(run):
    orrs_path, im_path = input_paths(run.cfg)
    run.manifest.record_input("orrs", orrs_path)
    run.manifest.record_input("im", im_path)
    orrs = read_orrs(orrs_path)
    im = read_im(im_path)
    qc = apply_qc(orrs, run.cfg.qc_policy())
    samples = match_records(qc.kept, im, run.cfg.site_grades).matched
    if not samples:
        raise EmptyDatasetException("No matched samples remain after QC.")
    return samples


def load_model(cfg):
    path = model_path(cfg)
    if not os.path.exists(path):
        raise MissingArtifactException("No trained model at {0}; run the train command first.".format(path))
    return load_stacked(path)


def cmd_synth(cfg):
    run = PipelineRun(cfg)
    with run.stage("synth"):
        fleet = generate_fleet(cfg.fleet_spec())
        if cfg.synth.corrupt_fraction:
            fleet = fleet._replace(orrs=corrupt_for_robustness(fleet.orrs, cfg.synth.corrupt_fraction, cfg.seed))
        run.written.extend(write_fleet(fleet, cfg.output_dir).values())
    return run.finish()


class LearnerTrainer(object):
    """Picklable ``trainer(X, y, cfg)`` for grid search over one base learner."""

    def __init__(self, name, categorical_levels):
        self.name = name
        self.categorical_levels = categorical_levels

    def __call__(self, X, y, cfg):
        return train_base_learner(self.name, cfg, X, y, self.categorical_levels)


def tune_base_configs(cfg, training, run):
    grids = cfg.learners.grids
    defaults = cfg.base_configs()
    if grids is None or not (grids.mlp or grids.forest or grids.gbt):
        return defaults
    tuned, rows = {}, []
    for p in POLLUTANTS:
        chosen = {}
        for name in BASE_LEARNERS:
            axes = getattr(grids, name)
            base = defaults.for_learner(name)
            if not axes:
                chosen[name] = base
                continue
            best, table = grid_search(
                HyperGrid(base, axes), LearnerTrainer(name, training.categorical_levels), training.X,
                training.targets[p], grids.k, cfg.seed, cfg.workers, training.vins
            )
            chosen[name] = best
            rows.extend({
                "pollutant": p, "learner": name, "params": canonical_json(r.params),
                "mean_rmse": r.mean_rmse, "error": r.error
            } for r in table)
        tuned[p] = BaseConfigs(chosen["mlp"], chosen["forest"], chosen["gbt"])
    run.write_rows(OutputFiles.GRID_SCORES, rows, ("pollutant", "learner", "params", "mean_rmse", "error"))
    return tuned


def _binned_rows(test, predictions):
    for feature in DEFAULT_BINNED_FEATURES:
        if feature not in test.schema.names:
            continue
        values = test.X[:, test.schema.index(feature)]
        for p in POLLUTANTS:
            for model_name, predicted in predictions[p].items():
                for b in binned_metrics(predicted, test.targets[p], values, feature):
                    metrics = b.metrics._asdict() if b.metrics else dict.fromkeys(METRICS_COLUMNS[2:])
                    yield dict(
                        pollutant=p, model=model_name, feature=feature, bin=b.bin_index, lower=b.lower,
                        upper=b.upper, **metrics
                    )


def cmd_train(cfg):
    run = PipelineRun(cfg)
    with run.stage("load"):
        samples = load_samples(run)
        train_rows, test_rows = holdout_split(samples, cfg.cv.holdout_fraction, cfg.seed)
        train_samples = [samples[i] for i in train_rows]
        schema = FeatureSchema()
        encoders = EncoderSet.fit(train_samples, schema)
        training = TrainingSet.from_samples(train_samples, schema, encoders)
        test = TrainingSet.from_samples([samples[i] for i in test_rows], schema, encoders)
    with run.stage("tune"):
        base_configs = tune_base_configs(cfg, training, run)
    with run.stage("train"):
        plan = make_cv_plan(training.vins, cfg.cv.k, cfg.seed)
        oof = generate_oof_predictions(training, plan, base_configs, cfg.workers)
        model = fit_stacked(training, plan, base_configs, cfg.meta_config(), cfg.passthrough, oof, cfg.workers)
        ensemble_oof = cross_validated_predictions(training, oof, cfg.meta_config(), cfg.passthrough, cfg.workers)
    with run.stage("evaluate"):
        rows = []
        for p in POLLUTANTS:
            for i, name in enumerate(BASE_LEARNERS):
                rows.append(metrics_row(p, name, compute_metrics(oof.predictions[p][:, i], training.targets[p])))
            rows.append(metrics_row(p, ENSEMBLE, compute_metrics(
                np.maximum(ensemble_oof[p], 0.0), training.targets[p]
            )))
        run.write_rows(OutputFiles.METRICS, rows, METRICS_COLUMNS)

        base_test = model.base_predictions(test.X)
        stacked_test, _ = model.predict(test.X)
        test_predictions = {
            p: dict([(name, base_test[p][:, i]) for i, name in enumerate(BASE_LEARNERS)] + [(ENSEMBLE, stacked_test[p])])
            for p in POLLUTANTS
        }
        run.write_rows(OutputFiles.TEST_METRICS, (
            metrics_row(p, name, compute_metrics(predicted, test.targets[p]))
            for p in POLLUTANTS for name, predicted in test_predictions[p].items()
        ), METRICS_COLUMNS)
        if cfg.reports.binned_metrics:
            run.write_rows(
                OutputFiles.BINNED_METRICS, _binned_rows(test, test_predictions),
                ("pollutant", "model", "feature", "bin", "lower", "upper") + METRICS_COLUMNS[2:]
            )
    save_stacked(model, model_path(cfg))
    run.written.append(model_path(cfg))
    run.write_json(OutputFiles.ENCODERS, encoders.to_document())
    run.write_json(OutputFiles.CV_PLAN, {
        "plan": plan.to_document(), "provenance": oof.provenance, "test_vins": sorted(set(test.vins)),
    })
    return run.finish()


def screening_frame(run, model):
    """Per-vehicle mean predictions, I/M truths and conditioning covariates."""
    cfg = run.cfg
    samples = load_samples(run)
    if cfg.screening.apply_met_window:
        samples = apply_met_window(samples, cfg.met_window_spec()).kept
        if not samples:
            raise EmptyDatasetException("No samples remain inside the meteorological window.")
    X = build_feature_matrix(samples, model.encoders, model.schema)
    predicted, _ = model.predict(X)
    vins = [s.vin for s in samples]
    columns = dict(
        [("predicted_" + p, predicted[p]) for p in POLLUTANTS]
        + [("truth_" + p, [s.target(p) for s in samples]) for p in POLLUTANTS]
        + [("vsp", [s.vsp for s in samples]), ("temperature", [s.orrs.temperature for s in samples]),
           ("humidity", [s.orrs.relative_humidity for s in samples])]
    )
    unique, means = aggregate_by_vin(vins, columns)
    dataset = ScreeningDataset(
        {p: means["predicted_" + p] for p in POLLUTANTS}, {p: means["truth_" + p] for p in POLLUTANTS}
    )
    return ScreeningFrame(unique, dataset, {k: means[k] for k in ("vsp", "temperature", "humidity")})


def cmd_screen(cfg):
    run = PipelineRun(cfg)
    model = load_model(cfg)
    with run.stage("screen"):
        frame = screening_frame(run, model)
        standards = cfg.standard_set()
        thresholds = {}
        for p in POLLUTANTS:
            binned_on = frame.dataset.truth[p] if cfg.screening.bin_over == "truth" else frame.dataset.predicted[p]
            curve = over_standard_rate_curve(
                binned_on, frame.dataset.truth[p], standards.standard(p), cfg.screening.n_bins, p
            )
            thresholds[p] = find_thresholds(curve, cfg.screening.eps)
            run.write_rows(
                OutputFiles.RATE_CURVE.format(p), curve.rows(), ("pollutant", "bin", "lower", "upper", "rate", "count")
            )
        run.write_json(OutputFiles.THRESHOLDS, thresholds_to_document(thresholds, {
            "dataset_hash": run.dataset_hash, "config_hash": cfg.hash, "bin_over": cfg.screening.bin_over,
            "n_vehicles": len(frame.vins),
        }))
        classification = classify_fleet(frame.dataset.predicted, thresholds)
        run.write_rows(OutputFiles.CLASSIFICATION, (
            dict([("vin", vin)] + [(p, float(frame.dataset.predicted[p][i])) for p in POLLUTANTS]
                 + [("class", classification.classes[i].value)])
            for i, vin in enumerate(frame.vins)
        ), ("vin",) + POLLUTANTS + ("class",))
        run.write_json(OutputFiles.PROPORTIONS, dict(classification.proportions))
    return run.finish()


def _group_rows(groups):
    for g in groups:
        for p in POLLUTANTS:
            pair = g.thresholds[p] if g.thresholds else None
            yield {
                "group": g.group, "lower": g.lower, "upper": g.upper, "count": g.count, "pollutant": p,
                "free": pair.free_threshold if pair else None, "re": pair.re_threshold if pair else None,
            }


def cmd_robustness(cfg):
    run = PipelineRun(cfg)
    model = load_model(cfg)
    with run.stage("robustness"):
        frame = screening_frame(run, model)
        standards = cfg.standard_set()
        report = monte_carlo_thresholds(frame.dataset, standards, cfg.monte_carlo_config(), n_jobs=cfg.workers)
        run.write_rows(OutputFiles.ROBUSTNESS, report.rows(), (
            "pollutant", "kind", "n", "t", "reference", "mean", "re_percent", "ae", "n_absent"
        ))
        run.write_rows(OutputFiles.ROBUSTNESS_SAMPLES, (
            {"pollutant": e.pollutant, "kind": e.kind, "repetition": r, "threshold": value}
            for e in report.entries for r, value in enumerate(e.samples)
        ), ("pollutant", "kind", "repetition", "threshold"))
    if cfg.reports.sweep:
        with run.stage("sweep"):
            sweep = sample_size_sweep(
                frame.dataset, standards, cfg.sweep.sizes, cfg.sweep.t, cfg.seed, cfg.sweep.knee_fraction,
                cfg.monte_carlo_config(), cfg.workers
            )
            run.write_rows(OutputFiles.SWEEP, (r._asdict() for r in sweep.rows), (
                "n", "pollutant", "kind", "reference", "mean", "re", "ae"
            ))
            run.write_rows(OutputFiles.SWEEP_KNEES, (
                {"pollutant": p, "kind": kind, "knee": knee} for (p, kind), knee in sorted(sweep.knees.items())
            ), ("pollutant", "kind", "knee"))
    if cfg.reports.thresholds_by_group:
        with run.stage("groups"):
            edges = {
                "vsp": cfg.screening.vsp_edges, "temperature": cfg.screening.temperature_edges,
                "humidity": cfg.screening.humidity_edges,
            }
            for name, group_edges in edges.items():
                groups = thresholds_by_group(
                    frame.dataset, standards, frame.covariates[name], group_edges, cfg.screening.n_bins,
                    cfg.screening.eps
                )
                run.write_rows(OutputFiles.THRESHOLDS_BY.format(name), _group_rows(groups), (
                    "group", "lower", "upper", "count", "pollutant", "free", "re"
                ))
    return run.finish()


def cmd_explain(cfg):
    run = PipelineRun(cfg)
    model = load_model(cfg)
    with run.stage("explain"):
        samples = load_samples(run)
        X = build_feature_matrix(samples, model.encoders, model.schema)
        n_selected = min(cfg.explain.n_samples, len(X))
        if not n_selected:
            raise ShapleyException("Sample selection is empty.")
        rows = np.sort(substream(cfg.seed, EXPLAIN_STREAM).choice(len(X), size=n_selected, replace=False))
        background = select_background(X, cfg.explain.background_size, cfg.seed)
        for p in cfg.explain.pollutants:
            report = explain_samples(
                PollutantPredictor(model, p), X[rows], background, model.schema.names, cfg.explain.n_permutations,
                cfg.seed, cfg.workers
            )
            run.write_rows(OutputFiles.SHAPLEY.format(p), report.long_rows(rows.tolist()), (
                "sample_id", "feature", "value"
            ))
            run.write_rows(OutputFiles.SHAPLEY_SUMMARY.format(p), report.summary_rows(), ("feature", "ms", "mas", "rank"))
    return run.finish()


def _read_table(path):
    return pd.read_csv(path).to_dict(orient="records") if os.path.exists(path) else None


def cmd_report(cfg):
    run = PipelineRun(cfg)
    with run.stage("report"):
        summary = {
            "metrics": _read_table(run.path(OutputFiles.METRICS)),
            "test_metrics": _read_table(run.path(OutputFiles.TEST_METRICS)),
            "robustness": _read_table(run.path(OutputFiles.ROBUSTNESS)),
            "sweep_knees": _read_table(run.path(OutputFiles.SWEEP_KNEES)),
        }
        for name, key in ((OutputFiles.THRESHOLDS, "thresholds"), (OutputFiles.PROPORTIONS, "proportions")):
            summary[key] = read_json(run.path(name)) if os.path.exists(run.path(name)) else None
        summary["top_factors"] = {}
        for p in POLLUTANTS:
            table = _read_table(run.path(OutputFiles.SHAPLEY_SUMMARY.format(p)))
            if table:
                summary["top_factors"][p] = [row["feature"] for row in table[:5]]
        if not any(v for v in summary.values()):
            raise MissingArtifactException("Nothing to report in {0}".format(cfg.output_dir))
        run.write_json(OutputFiles.SUMMARY, summary)
    return run.finish()


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "screen": cmd_screen,
    "robustness": cmd_robustness,
    "explain": cmd_explain,
    "report": cmd_report,
}
