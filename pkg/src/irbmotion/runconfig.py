"""Run configuration: one YAML file describing data, model, and training.

The schema is strict: unknown keys anywhere are errors, so a typo fails fast
instead of silently falling back to a default.  See the README for the
documented schema.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ConfigError
from .irb import SWEEP_FEATURE_TOTALS, IrbConfig, BranchSpec, default_config, sweep_configs
from .training import TrainConfig

__all__ = ["RunConfig", "load_run_config"]

_SPLIT_DEFAULT = (0.8, 0.1, 0.1)


@dataclass(frozen=True)
class RunConfig:
    seed: int
    data_dir: Path
    center_root: bool
    frame_rate: float
    split: tuple[float, float, float]
    irb_features: int
    branches: tuple | None
    passthrough_len: int
    gcn_layers: int
    train: TrainConfig
    out_dir: Path
    sweep_totals: tuple[int, ...]
    tail_epochs: int

    def irb_config(self) -> IrbConfig:
        if self.branches is not None:
            specs = tuple(BranchSpec(*b) for b in self.branches)
            total = sum(s.out_features for s in specs) + self.passthrough_len
            return IrbConfig(
                input_frames=self.train.t_past,
                branches=specs,
                passthrough_len=self.passthrough_len,
                residual_filters=math.ceil(total / self.train.t_past),
            )
        if self.irb_features == 360:
            return default_config(self.train.t_past)
        for config in sweep_configs(self.train.t_past):
            if config.total_features == self.irb_features:
                return config
        raise ConfigError(
            f"model.irb_features must be one of {list(SWEEP_FEATURE_TOTALS)} "
            f"or spelled out via model.branches, got {self.irb_features}"
        )


def _section(payload: dict, name: str, allowed: set[str]) -> dict:
    section = payload.pop(name, {})
    if section is None:
        section = {}
    if not isinstance(section, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {name!r}: {sorted(unknown)}")
    return section


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        payload = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    seed = payload.pop("seed", 0)
    data = _section(payload, "data", {"dir", "center_root", "frame_rate", "split"})
    model = _section(
        payload, "model", {"irb_features", "branches", "passthrough_len", "gcn_layers"}
    )
    train = _section(
        payload,
        "train",
        {
            "learning_rate",
            "decay_factor",
            "decay_every",
            "batch_size",
            "epochs",
            "t_past",
            "t_future",
            "loss_on_observed",
            "squared_error",
        },
    )
    paths = _section(payload, "paths", {"out_dir"})
    sweep_cfg = _section(payload, "sweep", {"feature_totals", "tail_epochs"})
    if payload:
        raise ConfigError(f"{path}: unknown top-level key(s): {sorted(payload)}")

    if "dir" not in data:
        raise ConfigError(f"{path}: data.dir is required")
    data_dir = (path.parent / str(data["dir"])).resolve()
    if not data_dir.is_dir():
        raise ConfigError(f"{path}: data.dir does not exist: {data_dir}")

    split = tuple(data.get("split", _SPLIT_DEFAULT))
    if len(split) != 3 or min(split) < 0 or abs(sum(split) - 1.0) > 1e-9:
        raise ConfigError(f"{path}: data.split must be three fractions summing to 1")

    try:
        train_config = TrainConfig(seed=seed, **train)
    except TypeError as exc:
        raise ConfigError(f"{path}: bad train section: {exc}") from None

    out_dir = os.environ.get("IRBMOTION_OUT_DIR") or paths.get("out_dir", "runs/latest")
    totals = tuple(sweep_cfg.get("feature_totals", SWEEP_FEATURE_TOTALS))

    return RunConfig(
        seed=int(seed),
        data_dir=data_dir,
        center_root=bool(data.get("center_root", False)),
        frame_rate=float(data.get("frame_rate", 25.0)),
        split=split,
        irb_features=int(model.get("irb_features", 360)),
        branches=tuple(tuple(b) for b in model["branches"]) if "branches" in model else None,
        passthrough_len=int(model.get("passthrough_len", 10)),
        gcn_layers=int(model.get("gcn_layers", 12)),
        train=train_config,
        out_dir=Path(out_dir),
        sweep_totals=totals,
        tail_epochs=int(sweep_cfg.get("tail_epochs", 5)),
    )
