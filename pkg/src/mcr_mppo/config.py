"""Run configuration: TOML or JSON files merged over defaults.

Layout (every section optional):

    [learner]          LearnerConfig fields
    [learner.cost]     CostModel fields
    [train]            demos, out, init, bc_epochs, bc_lr, bc_seats
    [metrics]          d_game_seeds, d_action_holdout, principal_only, seed_base

Unknown sections or keys are errors.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .engine import LAYOUT_VERSION
from .mppo import CostModel, LearnerConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CONFIG_ENV = "MCR_MPPO_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass
class TrainOptions:
    demos: Optional[str] = None
    out: Optional[str] = None
    init: Optional[str] = None
    bc_epochs: int = 0
    bc_lr: float = 1e-3
    bc_seats: str = "all"


@dataclass
class MetricOptions:
    d_game_seeds: int = 2000
    d_action_holdout: int = 100
    principal_only: bool = False
    seed_base: int = 500_000


@dataclass
class RunConfig:
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    train: TrainOptions = field(default_factory=TrainOptions)
    metrics: MetricOptions = field(default_factory=MetricOptions)
    layout_version: str = LAYOUT_VERSION

    def to_dict(self) -> dict:
        return {
            "learner": self.learner.to_dict(),
            "train": dataclasses.asdict(self.train),
            "metrics": dataclasses.asdict(self.metrics),
            "layout_version": self.layout_version,
        }


def _fields(cls) -> set:
    return {f.name for f in dataclasses.fields(cls) if f.init}


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"[{where}] must be a table")
    unknown = set(data) - _fields(cls)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(sorted(unknown))}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from None


def from_dict(data: dict) -> RunConfig:
    unknown = set(data) - {"learner", "train", "metrics", "layout_version"}
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    version = data.get("layout_version", LAYOUT_VERSION)
    if version != LAYOUT_VERSION:
        raise ConfigError(f"config was written for observation layout {version}, this build is {LAYOUT_VERSION}")
    learner = dict(data.get("learner", {}))
    if "cost" in learner:
        learner["cost"] = _build(CostModel, learner["cost"], "learner.cost")
    return RunConfig(
        _build(LearnerConfig, learner, "learner"),
        _build(TrainOptions, data.get("train", {}), "train"),
        _build(MetricOptions, data.get("metrics", {}), "metrics"),
    )


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_text()
    try:
        data = json.loads(text) if p.suffix == ".json" else tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{p}: {exc}") from None
    return from_dict(data)
