"""Experiment configuration: defaults, config-file loading, and precedence.

Defaults reproduce the measurement protocol constants: 5 calibration trials,
calibration/logging batch size 800, 5% percentile clipping per tail.
Precedence is CLI flag > config file > QDYN_SEED env (seed only) > default.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

from .builders import ARCHITECTURES
from .initializers import INITIALIZERS
from .quantize import WEIGHT_MODES

SEED_ENV_VAR = "QDYN_SEED"

ARCH_DISPLAY = {
    "toynet_regular": "Regular-Conv",
    "toynet_dws": "DWS-Conv",
    "mobilenet_v1_cifar": "MobileNetV1",
    "resnet34_cifar": "ResNet34",
}
INIT_DISPLAY = {"glorot_uniform": "GlorotUni", "he_normal": "HeNorm"}


def cell_name(arch: str, use_gamma: bool, init: str) -> str:
    """Report row name for one ablation cell, e.g. DWS-Conv-With-Gamma-GlorotUni."""
    gamma = "With-Gamma" if use_gamma else "No-Gamma"
    return f"{ARCH_DISPLAY[arch]}-{gamma}-{INIT_DISPLAY[init]}"


@dataclass
class ExperimentConfig:
    arch: str = "toynet_regular"
    init: str = "glorot_uniform"
    use_gamma: bool = True
    heterogeneity: float = 1.0
    trials: int = 5
    calib_batch: int = 800
    percentile: float = 0.05
    weight_mode: str = "per_tensor"
    seed: int = 0
    data: str | None = None      # CIFAR-10 .bin file or directory; None = synthetic
    eval_size: int = 256
    pool_size: int = 2000        # synthetic calibration pool size

    def validate(self) -> "ExperimentConfig":
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.arch!r}; expected one of {ARCHITECTURES}")
        if self.init not in INITIALIZERS:
            raise ValueError(f"unknown init {self.init!r}; expected one of {sorted(INITIALIZERS)}")
        if self.weight_mode not in WEIGHT_MODES:
            raise ValueError(f"unknown weight mode {self.weight_mode!r}; expected one of {WEIGHT_MODES}")
        if self.heterogeneity < 1.0:
            raise ValueError(f"heterogeneity must be >= 1, got {self.heterogeneity}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.calib_batch < 1:
            raise ValueError(f"calib_batch must be >= 1, got {self.calib_batch}")
        if not 0.0 <= self.percentile < 0.5:
            raise ValueError(f"percentile must be in [0, 0.5), got {self.percentile}")
        if self.eval_size < 1:
            raise ValueError(f"eval_size must be >= 1, got {self.eval_size}")
        return self

    def name(self) -> str:
        return cell_name(self.arch, self.use_gamma, self.init)

    def to_dict(self) -> dict:
        return asdict(self)


def load_config_file(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ValueError(f"config file {path} must contain a JSON object")
    unknown = set(doc) - set(ExperimentConfig.__dataclass_fields__)
    if unknown:
        raise ValueError(f"config file {path} has unknown keys: {sorted(unknown)}")
    return doc


def resolve_config(file_path: str | None = None,
                   overrides: dict | None = None) -> ExperimentConfig:
    """Merge defaults, config file, QDYN_SEED, and explicit overrides."""
    merged = asdict(ExperimentConfig())
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            merged["seed"] = int(env_seed)
        except ValueError as e:
            raise ValueError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}") from e
    if file_path is not None:
        merged.update(load_config_file(file_path))
    for key, value in (overrides or {}).items():
        if value is not None:
            if key not in merged:
                raise ValueError(f"unknown config key {key!r}")
            merged[key] = value
    return ExperimentConfig(**merged).validate()
