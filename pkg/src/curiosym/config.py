"""Experiment configuration: YAML file <-> frozen dataclasses, plus a stable hash."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .explorer import STRATEGIES, ExplorationConfig
from .io import canonical_json, sha256_hex
from .model import EncoderConfig, TrainConfig
from .symbols import DistillConfig
from .world import WorldConfig

OUTPUT_ENV = "CURIOSYM_OUTPUT_ROOT"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSection:
    hidden_width: int = 128
    hidden_layers: int = 4
    object_bits: int = 2
    action_bits: int = 3
    dropout_rate: float = 0.1
    temperature: float = 0.5
    loss_coefficient: float = 0.01
    straight_through: bool = False
    log_var_clamp: float = 10.0
    effect_scale: float = 10.0

    def encoder(self, head: str = "distribution") -> EncoderConfig:
        return EncoderConfig(head=head, **dataclasses.asdict(self))


@dataclass(frozen=True)
class TrainSection:
    batch_size: int = 512
    learning_rate: float = 1e-5
    clip_norm: float = 1.0
    optimizer: str = "sgd"

    def trainer(self, epochs: int) -> TrainConfig:
        return TrainConfig(epochs=epochs, **dataclasses.asdict(self))


@dataclass(frozen=True)
class ExplorationSection:
    candidates: int = 2000
    total_steps: int = 10000
    retrain_interval: int = 512
    epochs_per_retrain: int = 10
    active_threshold: float = 0.008

    def for_strategy(self, strategy: str) -> ExplorationConfig:
        return ExplorationConfig(strategy=strategy, **dataclasses.asdict(self))


@dataclass(frozen=True)
class PlannerSection:
    threshold: float = 0.05
    max_depth: int = 3
    single_tasks: int = 100
    double_tasks: int = 100


@dataclass(frozen=True)
class EvaluationSection:
    test_set_size: int = 2400
    max_test_attempts: int = 200000


@dataclass(frozen=True)
class ExperimentConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    exploration: ExplorationSection = field(default_factory=ExplorationSection)
    distill: DistillConfig = field(default_factory=DistillConfig)
    planner: PlannerSection = field(default_factory=PlannerSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    strategies: tuple[str, ...] = STRATEGIES
    seeds: tuple[int, ...] = (0, 1, 2)
    output_dir: str = "runs"

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        bad = [s for s in self.strategies if s not in STRATEGIES]
        if bad or not self.strategies:
            raise ConfigError(f"unknown strategies {bad}; choose from {STRATEGIES}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["strategies"] = list(self.strategies)
        d["seeds"] = list(self.seeds)
        return d

    def hash(self) -> str:
        """Hash of everything that shapes results; seeds and paths excluded."""
        d = self.to_dict()
        d.pop("seeds")
        d.pop("output_dir")
        d.pop("strategies")
        return sha256_hex(canonical_json(d))[:16]

    def with_overrides(self, seed: int | None = None, output_dir: str | None = None, **sections) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = dataclasses.replace(cfg, seeds=(int(seed),))
        if output_dir is not None:
            cfg = dataclasses.replace(cfg, output_dir=str(output_dir))
        for name, values in sections.items():
            cfg = dataclasses.replace(cfg, **{name: dataclasses.replace(getattr(cfg, name), **values)})
        return cfg


_SECTIONS = {
    "world": WorldConfig,
    "model": ModelSection,
    "train": TrainSection,
    "exploration": ExplorationSection,
    "distill": DistillConfig,
    "planner": PlannerSection,
    "evaluation": EvaluationSection,
}


def _build(cls, values, where):
    if values is None:
        return cls()
    if not isinstance(values, dict):
        raise ConfigError(f"[{where}] must be a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"[{where}] unknown keys: {', '.join(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}] {exc}") from exc


def from_dict(raw: dict) -> ExperimentConfig:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    top = {"strategies", "seeds", "output_dir", *_SECTIONS}
    unknown = sorted(set(raw) - top)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(unknown)}")
    kwargs = {name: _build(cls, raw.get(name), name) for name, cls in _SECTIONS.items()}
    for key in ("strategies", "seeds"):
        if key in raw:
            if not isinstance(raw[key], (list, tuple)):
                raise ConfigError(f"{key} must be a list")
            kwargs[key] = tuple(raw[key])
    if "output_dir" in raw:
        kwargs["output_dir"] = str(raw["output_dir"])
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return from_dict(raw)


def dump(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def output_root(cfg: ExperimentConfig, override: str | None = None) -> Path:
    if override:
        return Path(override)
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env) / cfg.output_dir
    return Path(cfg.output_dir)
