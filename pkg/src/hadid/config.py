"""Pipeline configuration: one flat record of every tunable."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace

from .errors import DataError, MissingFile
from .neuralnet import TrainConfig


@dataclass(frozen=True)
class PipelineConfig:
    # silence gate
    silence_threshold_db: float = -40.0
    min_silence_ms: float = 200.0
    # pitch
    f0_floor_hz: float = 75.0
    f0_ceil_hz: float = 500.0
    voicing_threshold: float = 0.45
    voicing_silence_db: float = -35.0
    # nuclei
    band_low_hz: float = 300.0
    band_high_hz: float = 2500.0
    peak_drop_db: float = 3.0
    min_nucleus_ms: float = 40.0
    merge_ms: float = 60.0
    edge_min_ms: float = 30.0
    # classifiers
    hidden_layers: tuple = (560, 560, 560, 560)
    dropout: float = 0.5
    default_k: int = 7
    flat_k: int = 7
    node_k: dict = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)
    # experiment
    seed: int = 0
    kfold: int = 5

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        self.validate()

    def validate(self):
        if self.silence_threshold_db >= 0:
            raise DataError("silence_threshold_db must be negative")
        if self.min_silence_ms <= 0:
            raise DataError("min_silence_ms must be positive")
        if not 0 < self.f0_floor_hz < self.f0_ceil_hz:
            raise DataError("need 0 < f0_floor_hz < f0_ceil_hz")
        if not 0 <= self.band_low_hz < self.band_high_hz:
            raise DataError("need 0 <= band_low_hz < band_high_hz")
        if min(self.min_nucleus_ms, self.merge_ms, self.edge_min_ms, self.peak_drop_db) <= 0:
            raise DataError("nucleus thresholds must be positive")
        if not self.hidden_layers or min(self.hidden_layers) < 1:
            raise DataError("need at least one hidden layer of size >= 1")
        if not 0 <= self.dropout < 1:
            raise DataError("dropout must be in [0, 1)")
        for k in [self.default_k, self.flat_k, *self.node_k.values()]:
            if not 1 <= int(k) <= 14:
                raise DataError("feature counts must be in 1..14")
        if self.kfold < 2:
            raise DataError("kfold must be >= 2")

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        train_kw = {k: kw.pop(k) for k in list(kw) if k in _TRAIN_FIELDS}
        cfg = replace(self, **kw)
        if train_kw:
            cfg = replace(cfg, train=replace(cfg.train, **train_kw))
        return cfg

    def to_dict(self):
        d = asdict(self)
        d["hidden_layers"] = list(self.hidden_layers)
        return d


_TRAIN_FIELDS = {f.name for f in fields(TrainConfig)}
_TOP_FIELDS = {f.name for f in fields(PipelineConfig)}


def load_config(path) -> PipelineConfig:
    """Read a JSON config; unknown keys are an error."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise MissingFile(path)
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return config_from_dict(raw)


def config_from_dict(raw) -> PipelineConfig:
    raw = dict(raw)
    unknown = set(raw) - _TOP_FIELDS
    if unknown:
        raise DataError(f"unknown config key(s): {sorted(unknown)}")
    train = raw.pop("train", {})
    if isinstance(train, dict):
        bad = set(train) - _TRAIN_FIELDS
        if bad:
            raise DataError(f"unknown train key(s): {sorted(bad)}")
        raw["train"] = TrainConfig(**train)
    return PipelineConfig(**raw)
