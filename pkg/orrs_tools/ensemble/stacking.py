import logging
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from orrs_tools.data.exceptions import SchemaMismatchException
from orrs_tools.data.features import FeatureSchema, EncoderSet, build_feature_matrix
from orrs_tools.data.records import POLLUTANTS
from orrs_tools.ensemble.exceptions import FoldTrainingException
from orrs_tools.learn.forest import ForestConfig, train_forest
from orrs_tools.learn.gbt import GbtConfig, train_gbt
from orrs_tools.learn.mlp import MlpConfig, train_mlp
from orrs_tools.learn.persistence import encode_model, decode_model, ModelKinds
from orrs_tools.learn.exceptions import ModelFormatException
from orrs_tools.utils import write_canonical_json, read_json


stacking_logger = logging.getLogger(__name__)

STACKED_FORMAT_VERSION = 1
BASE_LEARNERS = (ModelKinds.MLP.value, ModelKinds.FOREST.value, ModelKinds.GBT.value)
DEFAULT_META_CONFIG = GbtConfig(
    n_rounds=200, max_depth=3, subsample=1.0, colsample=1.0, learning_rate=0.05, gain_prune_threshold=0.0
)

OofResult = namedtuple('OofResult', ('predictions', 'provenance', 'plan'))
StackedPrediction = namedtuple('StackedPrediction', ('values', 'clamped'))


@dataclass(frozen=True)
class BaseConfigs(object):
    mlp: MlpConfig = field(default_factory=MlpConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    gbt: GbtConfig = field(default_factory=GbtConfig)

    def for_learner(self, name):
        return getattr(self, name)


def configs_for(base_configs, pollutant):
    """Base configs may be shared or tuned per pollutant ({pollutant: BaseConfigs})."""
    return base_configs[pollutant] if isinstance(base_configs, dict) else base_configs


class TrainingSet(object):
    """Row-aligned feature matrix, per-pollutant targets and VINs."""

    def __init__(self, X, targets, vins, schema, encoders):
        self.X = np.asarray(X, dtype=float)
        self.targets = {p: np.asarray(targets[p], dtype=float) for p in POLLUTANTS}
        self.vins = list(vins)
        self.schema = schema
        self.encoders = encoders

    def __repr__(self):
        return "TrainingSet(rows={0}, vehicles={1}, features={2})".format(
            len(self), len(set(self.vins)), len(self.schema)
        )

    def __len__(self):
        return len(self.vins)

    @property
    def categorical_levels(self):
        return self.encoders.categorical_levels(self.schema)

    @classmethod
    def from_samples(cls, samples, schema=None, encoders=None):
        schema = schema or FeatureSchema()
        encoders = encoders or EncoderSet.fit(samples, schema)
        X = build_feature_matrix(samples, encoders, schema)
        targets = {p: [s.target(p) for s in samples] for p in POLLUTANTS}
        return cls(X, targets, [s.vin for s in samples], schema, encoders)

    def subset(self, rows):
        rows = np.asarray(rows, dtype=int)
        return TrainingSet(
            self.X[rows], {p: y[rows] for p, y in self.targets.items()}, [self.vins[i] for i in rows],
            self.schema, self.encoders
        )


def train_base_learner(name, cfg, X, y, categorical_levels=None, n_jobs=1):
    if name == ModelKinds.MLP.value:
        return train_mlp(X, y, cfg, categorical_levels)
    if name == ModelKinds.FOREST.value:
        return train_forest(X, y, cfg, n_jobs=n_jobs)
    if name == ModelKinds.GBT.value:
        return train_gbt(X, y, cfg)
    raise ValueError("Unknown base learner: {0}".format(name))


def _meta_inputs(base_predictions, X, passthrough):
    return np.hstack([base_predictions, X]) if passthrough else base_predictions


def _oof_job(name, cfg, X, y, train, test, levels):
    # failures travel back as text; the parent raises with fold and learner attached
    try:
        model, _ = train_base_learner(name, cfg, X[train], y[train], levels)
        return model.predict(X[test]), None
    except Exception as e:
        return None, "{0}: {1}".format(type(e).__name__, e)


def generate_oof_predictions(training_set, plan, base_configs, n_jobs=1):
    """Per pollutant, an (n x 3) matrix of base predictions each made by a model that never saw its row."""
    X = training_set.X
    folds = list(plan.split(training_set.vins))
    levels = training_set.categorical_levels
    jobs = [
        (p, fold, train, test, name)
        for p in POLLUTANTS for fold, train, test in folds for name in BASE_LEARNERS
    ]
    stacking_logger.info("Generating out-of-fold predictions: {0} fits over {1} folds".format(len(jobs), plan.k))
    results = Parallel(n_jobs=n_jobs)(
        delayed(_oof_job)(
            name, configs_for(base_configs, p).for_learner(name), X, training_set.targets[p], train, test, levels
        )
        for p, fold, train, test, name in jobs
    )
    predictions = {p: np.full((len(training_set), len(BASE_LEARNERS)), np.nan) for p in POLLUTANTS}
    for (p, fold, _, test, name), (predicted, error) in zip(jobs, results):
        if error is not None:
            raise FoldTrainingException(fold, name, error, p)
        predictions[p][test, BASE_LEARNERS.index(name)] = predicted
    provenance = [
        {"fold": fold, "train_vins": sorted({training_set.vins[i] for i in train})} for fold, train, _ in folds
    ]
    return OofResult(predictions, provenance, plan)


class PollutantStack(object):
    def __init__(self, bases, meta):
        self.bases = dict(bases)
        self.meta = meta

    def base_matrix(self, X):
        return np.column_stack([self.bases[name].predict(X) for name in BASE_LEARNERS])


class StackedModel(object):
    def __init__(self, stacks, schema, encoders, passthrough=False, metadata=None):
        self.stacks = dict(stacks)
        self.schema = schema
        self.encoders = encoders
        self.passthrough = passthrough
        self.metadata = dict(metadata or {})

    def __repr__(self):
        return "StackedModel(pollutants={0}, passthrough={1}, schema={2})".format(
            sorted(self.stacks), self.passthrough, self.schema.hash[:12]
        )

    @property
    def meta_arity(self):
        return len(BASE_LEARNERS) + (len(self.schema) if self.passthrough else 0)

    def base_predictions(self, X):
        return {p: stack.base_matrix(X) for p, stack in self.stacks.items()}

    def predict_pollutant(self, X, pollutant):
        """Unclamped stacked prediction of one pollutant; only that pollutant's models run."""
        X = np.asarray(X, dtype=float)
        stack = self.stacks[pollutant]
        return stack.meta.predict(_meta_inputs(stack.base_matrix(X), X, self.passthrough))

    def predict_matrix(self, X):
        """Unclamped stacked predictions per pollutant."""
        return {p: self.predict_pollutant(X, p) for p in self.stacks}

    def predict(self, X):
        raw = self.predict_matrix(X)
        return {p: np.maximum(v, 0.0) for p, v in raw.items()}, {p: v < 0 for p, v in raw.items()}

    def to_document(self):
        return {
            "format_version": STACKED_FORMAT_VERSION,
            "feature_schema": self.schema.to_document(),
            "feature_schema_hash": self.schema.hash,
            "encoders": self.encoders.to_document(),
            "base_order": list(BASE_LEARNERS),
            "meta_arity": self.meta_arity,
            "passthrough": self.passthrough,
            "metadata": self.metadata,
            "pollutants": {
                p: {
                    "bases": {name: encode_model(m, self.schema.hash) for name, m in sorted(stack.bases.items())},
                    "meta": encode_model(stack.meta),
                }
                for p, stack in sorted(self.stacks.items())
            },
        }

    @classmethod
    def from_document(cls, doc):
        if doc.get("format_version") != STACKED_FORMAT_VERSION:
            raise ModelFormatException("Unsupported stacked model format: {0}".format(doc.get("format_version")))
        schema = FeatureSchema.from_document(doc["feature_schema"])
        if schema.hash != doc["feature_schema_hash"]:
            raise SchemaMismatchException("Stored feature schema does not match its recorded hash.")
        stacks = {
            p: PollutantStack(
                {name: decode_model(m) for name, m in entry["bases"].items()}, decode_model(entry["meta"])
            )
            for p, entry in doc["pollutants"].items()
        }
        return cls(stacks, schema, EncoderSet.from_document(doc["encoders"]), doc["passthrough"], doc["metadata"])


def fit_meta(oof_matrix, X, y, meta_config, passthrough=False):
    meta, _ = train_gbt(_meta_inputs(oof_matrix, X, passthrough), y, meta_config)
    return meta


def fit_stacked(training_set, plan, base_configs, meta_config=DEFAULT_META_CONFIG, passthrough=False, oof=None,
                n_jobs=1):
    if oof is None:
        oof = generate_oof_predictions(training_set, plan, base_configs, n_jobs)
    X = training_set.X
    levels = training_set.categorical_levels
    jobs = [(p, name) for p in POLLUTANTS for name in BASE_LEARNERS]
    stacking_logger.info("Refitting {0} base models on all {1} training rows".format(len(jobs), len(training_set)))
    refits = Parallel(n_jobs=n_jobs)(
        delayed(train_base_learner)(
            name, configs_for(base_configs, p).for_learner(name), X, training_set.targets[p], levels
        )
        for p, name in jobs
    )
    stacks = {}
    for p in POLLUTANTS:
        bases = {name: refits[jobs.index((p, name))][0] for name in BASE_LEARNERS}
        meta = fit_meta(oof.predictions[p], X, training_set.targets[p], meta_config, passthrough)
        stacks[p] = PollutantStack(bases, meta)
    metadata = {
        "n_rows": len(training_set), "n_vehicles": len(set(training_set.vins)), "k": plan.k, "cv_seed": plan.seed,
    }
    return StackedModel(stacks, training_set.schema, training_set.encoders, passthrough, metadata)


def _meta_fold_job(inputs, y, train, test, meta_config):
    meta, _ = train_gbt(inputs[train], y[train], meta_config)
    return meta.predict(inputs[test])


def cross_validated_predictions(training_set, oof, meta_config=DEFAULT_META_CONFIG, passthrough=False, n_jobs=1):
    """Second-stage CV: each row's ensemble prediction comes from a meta model fit on the other folds' OOF rows."""
    folds = list(oof.plan.split(training_set.vins))
    inputs = {p: _meta_inputs(oof.predictions[p], training_set.X, passthrough) for p in POLLUTANTS}
    jobs = [(p, train, test) for p in POLLUTANTS for _, train, test in folds]
    results = Parallel(n_jobs=n_jobs)(
        delayed(_meta_fold_job)(inputs[p], training_set.targets[p], train, test, meta_config)
        for p, train, test in jobs
    )
    predictions = {p: np.full(len(training_set), np.nan) for p in POLLUTANTS}
    for (p, _, test), predicted in zip(jobs, results):
        predictions[p][test] = predicted
    return predictions


def predict_stacked(model, features):
    """Clamped {pollutant: g/km} for one FeatureVector, with per-pollutant clamp flags."""
    if features.schema.hash != model.schema.hash:
        raise SchemaMismatchException("Feature schema {0} does not match model schema {1}".format(
            features.schema.hash[:12], model.schema.hash[:12]
        ))
    values, clamped = model.predict(features.values.reshape(1, -1))
    return StackedPrediction({p: float(v[0]) for p, v in values.items()}, {p: bool(c[0]) for p, c in clamped.items()})


def save_stacked(model, path):
    write_canonical_json(path, model.to_document())
    stacking_logger.info("Wrote stacked model to {0}".format(path))


def load_stacked(path):
    return StackedModel.from_document(read_json(path))


class PollutantPredictor(object):
    """Callable view of one pollutant's clamped stacked output, as attribution code expects."""

    def __init__(self, model, pollutant):
        self.model = model
        self.pollutant = pollutant

    def __repr__(self):
        return "PollutantPredictor({0})".format(self.pollutant)

    def __call__(self, X):
        return np.maximum(self.model.predict_pollutant(X, self.pollutant), 0.0)
