"""Run configuration documents and their validation.

A run config is a JSON object with optional sections ``model``, ``train``,
``sample`` and ``dataset``.  Unknown keys are rejected and every error
names the offending key path (``train.lr``).
"""

from __future__ import annotations

import json
import typing
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from dar.harness.data import DatasetSpec
from dar.model import ModelConfig
from dar.numerics.optim import AdamWHyper, LrSchedule
from dar.sampler import SamplingConfig


class ConfigError(ValueError):
    """Invalid configuration; ``path`` is the dotted key path at fault."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    batch_size: int = 16
    steps: int = 600
    lr: float = 1e-3
    ending_lr: float = 1e-5
    warmup_steps: int = 100
    beta1: float = 0.9
    beta2: float = 0.96
    weight_decay: float = 0.05
    clip: float = 1.0
    seed: int = 0
    checkpoint_every: int = 0
    dataset_path: str = ""
    codebook_path: str = ""
    checkpoint_path: str = ""

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        self.schedule()  # validates warmup/lr ordering

    def schedule(self) -> LrSchedule:
        # one "epoch" per optimizer step; the schedule is evaluated per step
        return LrSchedule(
            base_lr=self.lr,
            warmup_epochs=min(self.warmup_steps, self.steps),
            total_epochs=self.steps,
            ending_lr=self.ending_lr,
            steps_per_epoch=1,
        )

    def adamw(self, lr: float) -> AdamWHyper:
        return AdamWHyper(lr, self.beta1, self.beta2, self.weight_decay, self.clip)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.to_dict()
        return d


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    sample: SamplingConfig = field(default_factory=SamplingConfig)
    dataset: DatasetSpec = field(default_factory=DatasetSpec)

    def train_config(self) -> TrainConfig:
        return replace(self.train, model=self.model)

    def to_dict(self) -> dict:
        t = self.train.to_dict()
        t.pop("model")
        return {
            "model": self.model.to_dict(),
            "train": t,
            "sample": self.sample.to_dict(),
            "dataset": self.dataset.to_dict(),
        }


_SECTIONS = {"model": ModelConfig, "train": TrainConfig, "sample": SamplingConfig, "dataset": DatasetSpec}


def _coerce(value: Any, tp: Any, path: str) -> Any:
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected a boolean, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    raise ConfigError(path, "unsupported field type")


def section_from_dict(cls, data: Any, path: str, base=None):
    """Build dataclass ``cls`` from ``data`` over the defaults (or ``base``)."""
    if not isinstance(data, dict):
        raise ConfigError(path, "expected an object")
    hints = typing.get_type_hints(cls)
    known = {f.name: f for f in fields(cls) if hints[f.name] in (bool, int, float, str)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{path}.{key}", "unknown key")
    values = {k: _coerce(v, hints[k], f"{path}.{k}") for k, v in data.items()}
    try:
        return replace(base, **values) if base is not None else cls(**values)
    except ValueError as e:
        raise ConfigError(path, str(e)) from None


def run_config_from_dict(data: Any, base: RunConfig | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("", "config document must be a JSON object")
    for key in data:
        if key not in _SECTIONS:
            raise ConfigError(key, "unknown section")
    base = base or RunConfig()
    parts = {}
    for name, cls in _SECTIONS.items():
        parts[name] = section_from_dict(cls, data.get(name, {}), name, getattr(base, name))
    return RunConfig(**parts)


def load_run_config(path: str | Path, base: RunConfig | None = None) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError("", f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError("", f"{p}: invalid JSON ({e})") from None
    return run_config_from_dict(data, base)

