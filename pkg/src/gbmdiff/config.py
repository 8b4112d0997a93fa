"""Run configuration: JSON file, presets, and --set overrides.

Defaults reproduce the full experimental protocol (window length 2048,
batch 64, 1000 epochs, 120 series, 2000 reverse steps, sigma bounds
0.01/1.0). The desk preset shrinks everything to laptop scale.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .process import DiffusionProcess
from .sample import GenerationSpec
from .schedule import NoiseSchedule
from .scorenet import ScoreNetConfig
from .train import TrainConfig

__all__ = ["RunConfig", "load_config", "apply_overrides", "apply_preset"]


@dataclass
class NetSection:
    channels: int = 128
    diff_embed_dim: int = 256
    feat_embed_dim: int = 64
    time_embed_dim: int = 128
    n_res_blocks: int = 4
    n_heads: int = 8


@dataclass
class TrainSection:
    batch_size: int = 64
    epochs: int = 1000
    learning_rate: float = 1e-3
    t_floor: float = 1e-3
    n_embed_steps: int = 2000


@dataclass
class GenerationSection:
    n_series: int = 120
    n_steps: int = 2000


@dataclass
class DataSection:
    stride: int = 400
    min_years: float = 40.0


@dataclass
class PathsSection:
    input_dir: str = "data/csv"
    dataset: str = "out/dataset.bin"
    checkpoint: str = "out/model.ckpt"
    train_log: str = "out/train_log.csv"
    series: str = "out/series.csv"
    sidecar: str = "out/series.json"
    report_dir: str = "out/report"
    reference_series: str = ""


@dataclass
class RunConfig:
    seed: int = 0
    process: str = "gbm"
    schedule: str = "exponential"
    sigma_min: float = 0.01
    sigma_max: float = 1.0
    horizon: float = 1.0
    length: int = 2048
    net: NetSection = field(default_factory=NetSection)
    train: TrainSection = field(default_factory=TrainSection)
    generation: GenerationSection = field(default_factory=GenerationSection)
    data: DataSection = field(default_factory=DataSection)
    paths: PathsSection = field(default_factory=PathsSection)

    # -- factories -----------------------------------------------------

    def make_process(self) -> DiffusionProcess:
        try:
            schedule = NoiseSchedule(
                kind=self.schedule, sigma_min=self.sigma_min,
                sigma_max=self.sigma_max,
            )
            return DiffusionProcess(
                kind=self.process, schedule=schedule, horizon=self.horizon
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def make_net_config(self) -> ScoreNetConfig:
        try:
            return ScoreNetConfig(length=self.length, **dataclasses.asdict(self.net))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def make_train_config(self, threads=None) -> TrainConfig:
        try:
            return TrainConfig(
                batch_size=self.train.batch_size,
                epochs=self.train.epochs,
                learning_rate=self.train.learning_rate,
                t_floor=self.train.t_floor,
                seed=self.seed,
                n_embed_steps=self.train.n_embed_steps,
                threads=threads,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def make_generation_spec(self, scale: float = 1.0) -> GenerationSpec:
        try:
            return GenerationSpec(
                n_series=self.generation.n_series,
                length=self.length,
                n_steps=self.generation.n_steps,
                seed=self.seed,
                scale=scale,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2)


_SECTIONS = {
    "net": NetSection,
    "train": TrainSection,
    "generation": GenerationSection,
    "data": DataSection,
    "paths": PathsSection,
}


def _from_dict(cls, payload: dict, where: str):
    if not isinstance(payload, dict):
        raise ConfigError(f"{where}: expected an object, got {type(payload).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(payload) - set(fields)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in payload.items():
        if cls is RunConfig and name in _SECTIONS:
            kwargs[name] = _from_dict(_SECTIONS[name], value, f"{where}.{name}")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return _from_dict(RunConfig, payload, "config")


DESK_PRESET = {
    "length": 512,
    "train.epochs": 100,
    "generation.n_series": 20,
    "generation.n_steps": 500,
    "net.channels": 16,
    "net.diff_embed_dim": 64,
    "net.feat_embed_dim": 16,
    "net.time_embed_dim": 64,
    "net.n_heads": 4,
}


def apply_preset(config: RunConfig, preset: str) -> RunConfig:
    if preset == "paper":
        return config
    if preset == "desk":
        return apply_overrides(
            config, [f"{k}={v}" for k, v in DESK_PRESET.items()]
        )
    raise ConfigError(f"unknown preset {preset!r} (expected desk or paper)")


def _coerce(current, raw: str, key: str):
    if isinstance(current, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"--set {key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"--set {key}: {exc}") from exc
    return raw


def apply_overrides(config: RunConfig, assignments) -> RunConfig:
    """Apply `key.path=value` assignments onto a copy of the config."""
    for assignment in assignments:
        if "=" not in assignment:
            raise ConfigError(f"--set expects key=value, got {assignment!r}")
        key, raw = assignment.split("=", 1)
        parts = key.strip().split(".")
        target = config
        for part in parts[:-1]:
            if not dataclasses.is_dataclass(target) or not hasattr(target, part):
                raise ConfigError(f"--set {key}: unknown section {part!r}")
            target = getattr(target, part)
        leaf = parts[-1]
        if not dataclasses.is_dataclass(target) or not hasattr(target, leaf):
            raise ConfigError(f"--set {key}: unknown key")
        current = getattr(target, leaf)
        if dataclasses.is_dataclass(current):
            raise ConfigError(f"--set {key}: refers to a section, not a value")
        setattr(target, leaf, _coerce(current, raw.strip(), key))
    return config
