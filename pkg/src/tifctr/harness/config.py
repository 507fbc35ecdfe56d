"""Experiment configuration schema (YAML, version 1).

Example::

    version: 1
    dataset:
      source: synthetic          # synthetic | csv | prepared
      synthetic: {n_days: 10, samples_per_day: 5000, drift_rate: 0.5}
      min_frequency: 2
      ratios: [8, 1, 1]
    models:
      - {name: DNN, interaction: mlp_only}
    losses:
      - {variant: plain}
      - {variant: tif_linear, alpha: 1.0}
    seeds: [0, 1, 2, 3, 4]
    train: {batch_size: 256, max_epochs: 20, learning_rate: 0.001}
    output_dir: runs

Unknown keys anywhere are rejected.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..data import DriftConfig
from ..errors import ConfigurationError
from ..losses import LossSpec, canonical_variant
from ..models import ModelSpec

CONFIG_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SyntheticSection(_Strict):
    n_days: int = 10
    samples_per_day: int = 5000
    field_count: int = 8
    cardinality: int = 50
    drift_rate: float = 0.5
    base_ctr: float = 0.2
    seed: int = 0
    signal: float = 2.0
    noise: float = 0.05

    def drift_config(self):
        return DriftConfig(**self.model_dump())


class DatasetSection(_Strict):
    source: Literal["synthetic", "csv", "prepared"] = "synthetic"
    path: Optional[str] = None
    synthetic: SyntheticSection = Field(default_factory=SyntheticSection)
    min_frequency: int = Field(2, ge=1)
    ratios: List[float] = Field(default_factory=lambda: [8, 1, 1], min_length=3, max_length=3)
    day_aligned: bool = False
    time_features: bool = True
    on_error: Literal["abort", "skip"] = "abort"

    @model_validator(mode="after")
    def _path_needed(self):
        if self.source != "synthetic" and not self.path:
            raise ValueError(f"dataset.path is required for source {self.source!r}")
        return self


class ModelSection(_Strict):
    name: str
    interaction: Literal["mlp_only", "fm_plus_mlp", "cross_plus_mlp"] = "mlp_only"
    embedding_dim: int = Field(16, ge=1)
    hidden_widths: List[int] = Field(default_factory=lambda: [64, 64], min_length=1)
    cross_depth: int = Field(2, ge=1)

    def spec(self, field_count=1):
        return ModelSpec(self.interaction, self.embedding_dim, tuple(self.hidden_widths),
                         self.cross_depth, field_count)


class LossSection(_Strict):
    variant: str
    alpha: float = Field(1.0, gt=0)
    scale: float = Field(1.0, gt=0)
    label: Optional[str] = None

    @model_validator(mode="after")
    def _known_variant(self):
        canonical_variant(self.variant)
        return self

    @property
    def canonical(self):
        return canonical_variant(self.variant)

    @property
    def name(self):
        if self.label:
            return self.label
        name = self.canonical
        if self.alpha != 1.0:
            name += f"_a{self.alpha:g}"
        if self.scale != 1.0:
            name += f"_s{self.scale:g}"
        return name

    def spec(self, n_days, normalization="mean"):
        return LossSpec(self.canonical, self.alpha, n_days, self.scale, normalization)


class TrainSection(_Strict):
    batch_size: int = Field(256, ge=1)
    max_epochs: int = Field(20, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    early_stop_patience: int = Field(2, ge=1)
    eval_metric: Literal["auc", "logloss"] = "auc"
    normalization: Literal["mean", "weight_sum"] = "mean"


def _default_losses():
    return [LossSection(variant=v) for v in ("plain", "tif_linear", "tif_anti", "tif_exp", "tif_log")]


class ExperimentConfig(_Strict):
    version: Literal[1] = CONFIG_VERSION
    dataset: DatasetSection = Field(default_factory=DatasetSection)
    models: List[ModelSection] = Field(
        default_factory=lambda: [ModelSection(name="DNN")], min_length=1)
    losses: List[LossSection] = Field(default_factory=_default_losses, min_length=1)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_length=1)
    train: TrainSection = Field(default_factory=TrainSection)
    output_dir: str = "runs"

    @model_validator(mode="after")
    def _check(self):
        if not any(l.canonical == "plain" for l in self.losses):
            raise ValueError("losses must include a 'plain' baseline for RelaImp")
        for kind, names in (("model", [m.name for m in self.models]),
                            ("loss", [l.name for l in self.losses])):
            if len(set(names)) != len(names):
                raise ValueError(f"duplicate {kind} names: {names}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("duplicate seeds")
        return self

    def dataset_hash(self):
        blob = json.dumps(self.dataset.model_dump(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def parse_config(obj):
    try:
        return ExperimentConfig.model_validate(obj or {})
    except ValidationError as exc:
        raise ConfigurationError(f"invalid experiment config:\n{exc}") from None


def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        obj = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: not valid YAML: {exc}") from None
    if obj is not None and not isinstance(obj, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    return parse_config(obj)
