"""Experiment configuration: a flat, diffable key=value format with typed
parsing, exhaustive unknown-key rejection, and a stable content hash."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass

from .errors import ConfigError

VARIANTS = ("proto", "bank", "dist")


@dataclass
class TrainConfig:
    # objective
    variant: str = "dist"
    lambda_cl: float = 1.0
    lambda_reg: float = 1.0
    reg_sign: float = 1.0  # +1 = formula as written; -1 = diversity-promoting direction
    tau: float = 0.1
    alpha: float = 0.968
    beta: float = 0.999
    bank_size: int = 200
    warmup_iters: int = 3000
    max_iters: int = 2000
    learning_rate: float = 0.5
    seed: int = 0
    stats_features: str = "proj"  # proj | encoder
    query_limit: int = 256  # 0 = use every labeled pixel
    query_conf_filter: bool = False
    # cropping / augmentation
    use_cbc: bool = True
    crop_height: int = 16
    crop_width: int = 16
    cat_max_ratio: float = 0.75
    crop_trials: int = 10
    flip_prob: float = 0.5
    noise_sigma: float = 0.1
    channel_jitter: float = 0.1
    use_rare_sampling: bool = True
    rare_temperature: float = 1.0
    # model
    hidden_dim: int = 32
    embed_dim: int = 16
    # synthetic benchmark
    height: int = 24
    width: int = 24
    num_classes: int = 4
    input_dim: int = 8
    class_sep: float = 2.0
    noise_scale: float = 0.6
    shift: float = 1.5
    cov_scale: float = 1.3
    rect_min: int = 6
    rect_max: int = 13
    rects_per_class: int = 2
    rare_rect_min: int = 3
    rare_rect_max: int = 6
    data_seed: int = 7
    n_source: int = 40
    n_target: int = 40
    n_eval: int = 12
    # logging / evaluation
    eval_every: int = 200

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.stats_features not in ("proj", "encoder"):
            raise ConfigError("stats_features must be proj or encoder")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must be in (0, 1)")
        if not 0 <= self.beta < 1:
            raise ConfigError("beta must be in [0, 1)")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if self.reg_sign not in (-1.0, 1.0):
            raise ConfigError("reg_sign must be +1 or -1")
        for name in ("bank_size", "max_iters", "learning_rate", "hidden_dim", "embed_dim",
                     "height", "width", "input_dim", "crop_height", "crop_width",
                     "crop_trials", "n_source", "n_target", "n_eval", "eval_every",
                     "rare_temperature"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        if self.warmup_iters < 0 or self.query_limit < 0:
            raise ConfigError("warmup_iters and query_limit must be >= 0")
        if self.crop_height > self.height or self.crop_width > self.width:
            raise ConfigError("crop dims must fit the scene")
        if not self.rect_min <= self.rect_max or not self.rare_rect_min <= self.rare_rect_max:
            raise ConfigError("rectangle size ranges are inverted")
        if self.rect_max > min(self.height, self.width):
            raise ConfigError("rect_max exceeds scene dims")


@dataclass
class ExperimentConfig(TrainConfig):
    out: str = ""  # output directory; the CLI --out flag overrides
    post_verify: str = ""  # comma list of suites to run after training


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _parse_value(key: str, raw: str, where: str):
    typ = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if typ in ("int", int):
            return int(raw)
        if typ in ("float", float):
            return float(raw)
        if typ in ("bool", bool):
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key}: {exc}") from None


def parse_overrides(pairs: list[str]) -> dict:
    """key=value strings (from --override flags) into a typed dict."""
    out = {}
    for i, pair in enumerate(pairs):
        if "=" not in pair:
            raise ConfigError(f"override {i + 1} ({pair!r}): expected key=value")
        key, raw = pair.split("=", 1)
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"override {i + 1}: unknown key {key!r}")
        out[key] = _parse_value(key, raw, f"override {i + 1}")
    return out


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read a flat key=value file; '#' starts a comment; unknown keys are errors."""
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {text!r}")
        key, raw = text.split("=", 1)
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw, f"{path}:{lineno}")
    values.update(overrides or {})
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def config_hash(cfg: TrainConfig) -> str:
    """Stable digest of the training-relevant fields (runtime context like the
    output directory is excluded)."""
    canon = "\n".join(
        f"{f.name}={getattr(cfg, f.name)!r}" for f in dataclasses.fields(TrainConfig))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def config_dict(cfg: TrainConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in dataclasses.fields(TrainConfig)}


def config_from_dict(values: dict) -> ExperimentConfig:
    unknown = set(values) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg
