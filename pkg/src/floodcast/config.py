"""Declarative run configuration: one JSON file drives every command.

Each section maps onto the corresponding module's config dataclass and is
validated up front; unknown sections or keys are rejected with the
offending name so typos fail before any work starts.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from floodcast.augment import AugmentConfig
from floodcast.loss import LossConfig
from floodcast.network import ModelConfig
from floodcast.synthgen import SynthConfig
from floodcast.training import CurriculumConfig, EnsembleConfig, TrainConfig


class ConfigError(ValueError):
    """Configuration file failed schema validation."""


@dataclass(frozen=True)
class PathsConfig:
    out_dir: str = "runs/data"
    checkpoint_dir: str = "runs/checkpoint"
    tables_dir: str | None = None
    boundaries: str | None = None


@dataclass(frozen=True)
class CorpusConfig:
    slr_levels: tuple[float, ...] = (0.5, 1.0)
    scenarios: int = 50
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)

    def __post_init__(self):
        if not self.slr_levels:
            raise ValueError("need at least one SLR level")
        if self.scenarios < 1:
            raise ValueError("need at least one scenario")


@dataclass(frozen=True)
class CoordsConfig:
    mode: str = "latlon"  # "latlon" (x = lon, y = lat) or "utm"
    zone: int = 10
    northern: bool = True

    def __post_init__(self):
        if self.mode not in ("latlon", "utm"):
            raise ValueError(f"coords mode must be 'latlon' or 'utm', got {self.mode!r}")


@dataclass(frozen=True)
class EvalConfig:
    deltas: tuple[float, float] = (0.5, 0.1)
    zero_tol: float = 1e-6


@dataclass(frozen=True)
class ServeConfig:
    port: int = 8765
    slr_range: tuple[float, float] = (0.0, 2.0)


@dataclass(frozen=True)
class RunConfig:
    mode: str = "synth"  # "synth" or "region"
    paths: PathsConfig = field(default_factory=PathsConfig)
    grid_n: int = 64
    coords: CoordsConfig = field(default_factory=CoordsConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    serve: ServeConfig = field(default_factory=ServeConfig)

    def __post_init__(self):
        if self.mode not in ("synth", "region"):
            raise ValueError(f"mode must be 'synth' or 'region', got {self.mode!r}")


_SECTIONS = {
    "paths": PathsConfig,
    "coords": CoordsConfig,
    "corpus": CorpusConfig,
    "synth": SynthConfig,
    "augment": AugmentConfig,
    "model": ModelConfig,
    "loss": LossConfig,
    "train": TrainConfig,
    "curriculum": CurriculumConfig,
    "ensemble": EnsembleConfig,
    "eval": EvalConfig,
    "serve": ServeConfig,
}
_SCALARS = {"mode", "grid_n"}


def _listify(value):
    return tuple(_listify(v) for v in value) if isinstance(value, list) else value


def _build_section(cls, data: dict, section: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be an object")
    valid = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - valid)
    if unknown:
        raise ConfigError(f"unknown key(s) in section {section!r}: {', '.join(unknown)}")
    try:
        return cls(**{k: _listify(v) for k, v in data.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section {section!r}: {exc}") from exc


def run_config_from_dict(data: dict) -> RunConfig:
    unknown = sorted(set(data) - set(_SECTIONS) - _SCALARS)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _build_section(cls, data[name], name)
    for name in _SCALARS:
        if name in data:
            kwargs[name] = data[name]
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return run_config_from_dict(data)
