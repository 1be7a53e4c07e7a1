"""Pipeline configuration: a YAML document validated by pydantic, plus flag overrides."""
import logging
import os
from typing import Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from orrs_tools.cli.exceptions import ConfigException
from orrs_tools.data.records import QcPolicy
from orrs_tools.ensemble.stacking import BaseConfigs
from orrs_tools.learn.forest import ForestConfig
from orrs_tools.learn.gbt import GbtConfig
from orrs_tools.learn.mlp import MlpConfig
from orrs_tools.screening.curves import StandardSet
from orrs_tools.screening.robustness import MonteCarloConfig
from orrs_tools.screening.window import MetWindow
from orrs_tools.synth.fleet import FleetSpec
from orrs_tools.utils import canonical_hash


config_logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "ORRS_TOOLS_OUTPUT_DIR"

MLP_DROPOUT_RATES = (0.1, 0.2, 0.3)
MLP_LEARNING_RATES = (1e-3, 1e-2, 1e-1)
FOREST_TREE_COUNTS = (100, 200, 300, 400)


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PathsSection(Section):
    orrs: Optional[str] = None
    im: Optional[str] = None
    output_dir: str = "orrs_output"
    model: Optional[str] = None


class QcSection(Section):
    max_relative_humidity: float = Field(default=95.0, gt=0)
    max_temperature: float = Field(default=40.0, gt=0)


class MetWindowSection(Section):
    t_low: float = 6.0
    t_high: float = 32.0
    rh_max: float = Field(default=80.0, gt=0)
    wind_max: float = Field(default=5.0, gt=0)
    vsp_max: float = 18.0

    @model_validator(mode="after")
    def temperature_range(self):
        if self.t_low > self.t_high:
            raise ValueError("t_low must not exceed t_high")
        return self


class CvSection(Section):
    k: int = Field(default=10, ge=2)
    holdout_fraction: float = Field(default=0.1, gt=0, lt=1)


class MlpSection(Section):
    hidden_layers: List[int] = Field(default_factory=lambda: [256, 256], min_length=1)
    activation: Literal["relu"] = "relu"
    output_activation: Literal["relu", "identity"] = "relu"
    dropout_rate: float = 0.1
    learning_rate: float = 1e-2
    epochs: int = Field(default=100, ge=100, le=400)
    batch_size: int = Field(default=256, ge=1)

    @field_validator("hidden_layers")
    @classmethod
    def positive_widths(cls, v):
        if any(w <= 0 for w in v):
            raise ValueError("hidden layer widths must be positive")
        return v

    @field_validator("dropout_rate")
    @classmethod
    def dropout_on_grid(cls, v):
        if v not in MLP_DROPOUT_RATES:
            raise ValueError("dropout_rate must be one of {0}".format(MLP_DROPOUT_RATES))
        return v

    @field_validator("learning_rate")
    @classmethod
    def learning_rate_on_grid(cls, v):
        if v not in MLP_LEARNING_RATES:
            raise ValueError("learning_rate must be one of {0}".format(MLP_LEARNING_RATES))
        return v


class ForestSection(Section):
    n_trees: int = 200
    max_depth: int = Field(default=8, ge=3, le=8)
    min_samples_split: int = Field(default=2, ge=2, le=6)
    split_criterion: Literal["variance", "gini", "entropy"] = "variance"
    max_features: float = Field(default=1.0, gt=0, le=1)

    @field_validator("n_trees")
    @classmethod
    def trees_on_grid(cls, v):
        if v not in FOREST_TREE_COUNTS:
            raise ValueError("n_trees must be one of {0}".format(FOREST_TREE_COUNTS))
        return v


class GbtSection(Section):
    n_rounds: int = Field(default=300, ge=0)
    max_depth: int = Field(default=6, ge=4, le=8)
    min_child_weight: int = Field(default=1, ge=1, le=5)
    subsample: float = Field(default=0.8, ge=0.5, le=1.0)
    colsample: float = Field(default=0.8, ge=0.5, le=1.0)
    learning_rate: float = Field(default=0.1, gt=0, le=1)
    lambda_l2: float = Field(default=1.0, ge=0)
    gain_prune_threshold: float = Field(default=0.01, ge=0, lt=1)
    refit_pruned: bool = False


class MetaSection(Section):
    n_rounds: int = Field(default=200, ge=0)
    max_depth: int = Field(default=3, ge=1, le=8)
    min_child_weight: int = Field(default=1, ge=1)
    learning_rate: float = Field(default=0.05, gt=0, le=1)
    lambda_l2: float = Field(default=1.0, ge=0)


class GridsSection(Section):
    mlp: Dict[str, list] = Field(default_factory=dict)
    forest: Dict[str, list] = Field(default_factory=dict)
    gbt: Dict[str, list] = Field(default_factory=dict)
    k: int = Field(default=3, ge=2)


class LearnersSection(Section):
    mlp: MlpSection = Field(default_factory=MlpSection)
    forest: ForestSection = Field(default_factory=ForestSection)
    gbt: GbtSection = Field(default_factory=GbtSection)
    meta: MetaSection = Field(default_factory=MetaSection)
    grids: Optional[GridsSection] = None


class StandardsSection(Section):
    co: float = Field(default=8.0, gt=0)
    hc: float = Field(default=1.6, gt=0)
    no: float = Field(default=1.3, gt=0)


class ScreeningSection(Section):
    n_bins: int = Field(default=50, ge=2)
    eps: float = Field(default=0.0, ge=0, lt=0.5)
    bin_over: Literal["predicted", "truth"] = "predicted"
    apply_met_window: bool = True
    vsp_edges: List[float] = Field(default_factory=lambda: [-20.0, 0.0, 6.0, 12.0, 18.0])
    temperature_edges: List[float] = Field(default_factory=lambda: [6.0, 14.0, 22.0, 32.0])
    humidity_edges: List[float] = Field(default_factory=lambda: [0.0, 40.0, 60.0, 80.0])

    @field_validator("vsp_edges", "temperature_edges", "humidity_edges")
    @classmethod
    def ascending_edges(cls, v):
        if len(v) < 2 or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("edges must be strictly ascending with at least 2 entries")
        return v


class MonteCarloSection(Section):
    t: int = Field(default=500, ge=1)
    n: int = Field(default=15000, ge=1)
    stratified: bool = True


class SweepSection(Section):
    sizes: List[int] = Field(default_factory=lambda: [2000, 5000, 10000, 15000])
    t: int = Field(default=100, ge=1)
    knee_fraction: float = Field(default=0.1, gt=0, lt=1)


class ExplainSection(Section):
    n_samples: int = Field(default=100, ge=1)
    n_permutations: int = Field(default=100, ge=1)
    background_size: int = Field(default=256, ge=1)
    pollutants: List[Literal["co", "hc", "no"]] = Field(default_factory=lambda: ["co", "hc", "no"])


class SynthSection(Section):
    n_vehicles: int = Field(default=24000, ge=100)
    top_decile_share: float = Field(default=0.55, ge=0.5, lt=1)
    orrs_records_per_vehicle: float = Field(default=1.1, ge=1)
    over_standard_share: Optional[float] = Field(default=0.05, gt=0, lt=0.5)
    qc_violation_rate: float = Field(default=0.0656, ge=0, lt=1)
    out_of_window_rate: Optional[float] = None
    corrupt_fraction: float = Field(default=0.0, ge=0, le=1)


class ReportsSection(Section):
    binned_metrics: bool = True
    thresholds_by_group: bool = True
    sweep: bool = True


class PipelineConfig(Section):
    paths: PathsSection = Field(default_factory=PathsSection)
    seed: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)
    site_grades: Dict[str, float] = Field(default_factory=dict)
    qc: QcSection = Field(default_factory=QcSection)
    met_window: MetWindowSection = Field(default_factory=MetWindowSection)
    cv: CvSection = Field(default_factory=CvSection)
    learners: LearnersSection = Field(default_factory=LearnersSection)
    passthrough: bool = False
    standards: StandardsSection = Field(default_factory=StandardsSection)
    screening: ScreeningSection = Field(default_factory=ScreeningSection)
    monte_carlo: MonteCarloSection = Field(default_factory=MonteCarloSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    explain: ExplainSection = Field(default_factory=ExplainSection)
    synth: SynthSection = Field(default_factory=SynthSection)
    reports: ReportsSection = Field(default_factory=ReportsSection)

    @property
    def hash(self):
        return canonical_hash(self.model_dump(mode="json"))

    @property
    def output_dir(self):
        return self.paths.output_dir

    def qc_policy(self):
        return QcPolicy(self.qc.max_relative_humidity, self.qc.max_temperature)

    def met_window_spec(self):
        return MetWindow(**self.met_window.model_dump())

    def standard_set(self):
        return StandardSet(**self.standards.model_dump())

    def monte_carlo_config(self):
        return MonteCarloConfig(
            t=self.monte_carlo.t, n=self.monte_carlo.n, stratified=self.monte_carlo.stratified, seed=self.seed,
            n_bins=self.screening.n_bins, eps=self.screening.eps
        )

    def mlp_config(self, **overrides):
        values = dict(self.learners.mlp.model_dump(), seed=self.seed)
        values["hidden_layers"] = tuple(values["hidden_layers"])
        values.update(overrides)
        return MlpConfig(**values)

    def forest_config(self, **overrides):
        return ForestConfig(**dict(self.learners.forest.model_dump(), seed=self.seed, **overrides))

    def gbt_config(self, **overrides):
        return GbtConfig(**dict(self.learners.gbt.model_dump(), seed=self.seed, **overrides))

    def base_configs(self):
        return BaseConfigs(self.mlp_config(), self.forest_config(), self.gbt_config())

    def meta_config(self):
        return GbtConfig(
            subsample=1.0, colsample=1.0, gain_prune_threshold=0.0, seed=self.seed, **self.learners.meta.model_dump()
        )

    def fleet_spec(self):
        values = self.synth.model_dump()
        values.pop("corrupt_fraction")
        return FleetSpec(seed=self.seed, standards=self.standard_set(), **values)


def _key_path(error):
    return ".".join(str(part) for part in error["loc"])


def _set_dotted(document, dotted_key, value):
    node = document
    parts = dotted_key.split(".")
    for part in parts[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            child = node[part] = {}
        node = child
    node[parts[-1]] = value


def parse_override(text):
    if "=" not in text:
        raise ConfigException(text, "overrides take the form dotted.key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigException(text, "empty key in override")
    try:
        return key, yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigException(key, "unparseable override value {0!r}: {1}".format(raw, e))


def read_config_document(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigException(None, "{0} is not valid YAML: {1}".format(path, e))
    if document is None:
        return {}
    if not isinstance(document, dict):
        raise ConfigException(None, "{0} must hold a mapping at the top level".format(path))
    return document


def _check_grids(learners):
    if learners.grids is None:
        return
    for learner in ("mlp", "forest", "gbt"):
        section = getattr(learners, learner)
        for axis, values in getattr(learners.grids, learner).items():
            key_path = "learners.grids.{0}.{1}".format(learner, axis)
            if not values:
                raise ConfigException(key_path, "grid axis is empty")
            for value in values:
                try:
                    type(section).model_validate(dict(section.model_dump(), **{axis: value}))
                except ValidationError as e:
                    raise ConfigException(key_path, "value {0!r} rejected: {1}".format(value, e.errors()[0]["msg"]))


def validate_config(document):
    try:
        config = PipelineConfig.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigException(_key_path(first), first["msg"])
    _check_grids(config.learners)
    return config


def load_config(path=None, overrides=(), environ=None):
    """File, then environment, then ``--set`` flags; later sources win."""
    environ = os.environ if environ is None else environ
    document = read_config_document(path) if path else {}
    if environ.get(OUTPUT_DIR_ENV):
        _set_dotted(document, "paths.output_dir", environ[OUTPUT_DIR_ENV])
    for text in overrides:
        key, value = parse_override(text)
        _set_dotted(document, key, value)
    config = validate_config(document)
    for key in ("orrs", "im"):
        path_value = getattr(config.paths, key)
        if path_value is not None and not os.path.exists(path_value):
            raise ConfigException("paths.{0}".format(key), "{0} does not exist".format(path_value))
    config_logger.debug("Loaded configuration {0}".format(config.hash[:12]))
    return config
