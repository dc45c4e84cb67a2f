"""Run configuration: one JSON file, every field defaulted, unknown keys
rejected by name. Command-line flags override file values."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .model import ModelConfig
from .seeding import derive_seed
from .training import TrainConfig


@dataclass
class ModelSection:
    layers: int = 12
    heads: int = 8
    d_model: int = 128
    d_ff: int = 512
    window: int = 50
    input_dim: int | None = None  # None: take the data's feature dim
    classes: int | None = None  # None: take the data's class count


@dataclass
class TrainingSection:
    batch_size: int = 50
    lr0: float = 0.005
    lr_decay_every: int = 10
    lr_decay_factor: float = 0.1
    max_epochs: int = 200
    weight_decay: float = 1e-4
    beta1: float = 0.92
    beta2: float = 0.999
    adam_eps: float = 1e-8
    early_stop_patience: int = 20


@dataclass
class DataSection:
    manifest: str | None = None  # None: generate synthetic data
    classes: int = 10
    per_class: int = 20
    dim: int = 12
    noise_sigma: float = 0.05
    hands: int = 1
    split_ratio: float = 0.8
    val_fraction: float = 0.1


@dataclass
class SegmentationSection:
    window: int = 50
    stride: int = 1
    threshold: float = 0.51
    n_streams: int = 20
    signs_per_stream: int = 10


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    data: DataSection = field(default_factory=DataSection)
    segmentation: SegmentationSection = field(default_factory=SegmentationSection)
    out_dir: str = "out"
    seed: int = 0
    threads: int = 1

    def model_config(self, input_dim: int, classes: int) -> ModelConfig:
        """Concrete architecture, filling unset dims from the data."""
        return ModelConfig(
            layers=self.model.layers,
            heads=self.model.heads,
            d_model=self.model.d_model,
            d_ff=self.model.d_ff,
            window=self.model.window,
            input_dim=self.model.input_dim if self.model.input_dim is not None else input_dim,
            classes=self.model.classes if self.model.classes is not None else classes,
        )

    def train_config(self) -> TrainConfig:
        t = self.training
        return TrainConfig(
            batch_size=t.batch_size,
            lr0=t.lr0,
            lr_decay_every=t.lr_decay_every,
            lr_decay_factor=t.lr_decay_factor,
            max_epochs=t.max_epochs,
            weight_decay=t.weight_decay,
            beta1=t.beta1,
            beta2=t.beta2,
            adam_eps=t.adam_eps,
            early_stop_patience=t.early_stop_patience,
            seed=derive_seed(self.seed, "train"),
        )


_SECTIONS = {
    "model": ModelSection,
    "training": TrainingSection,
    "data": DataSection,
    "segmentation": SegmentationSection,
}
# fields that accept null / a string path, or may be filled from data
_OPTIONAL_INT = {("model", "input_dim"), ("model", "classes")}
_OPTIONAL_STR = {("data", "manifest")}


def _check_type(path: str, value, expected: type):
    if expected is int:
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"config key {path}: expected an integer, got {value!r}")
    elif expected is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"config key {path}: expected a number, got {value!r}")
        value = float(value)
    elif expected is str:
        if not isinstance(value, str):
            raise ConfigError(f"config key {path}: expected a string, got {value!r}")
    return value


def load_config(source: bytes | str | None) -> RunConfig:
    """Parse a JSON config, filling defaults for everything absent.

    An empty document ({}) is valid and yields the full default config.
    Unknown keys and type mismatches raise ConfigError naming the key.
    """
    cfg = RunConfig()
    if source is None:
        return cfg
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        obj = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError("config top level must be a JSON object")

    for section_name, section_value in obj.items():
        if section_name in ("out_dir", "seed", "threads"):
            expected = str if section_name == "out_dir" else int
            setattr(cfg, section_name, _check_type(section_name, section_value, expected))
            continue
        if section_name not in _SECTIONS:
            raise ConfigError(f"unknown config key: {section_name}")
        if not isinstance(section_value, dict):
            raise ConfigError(f"config key {section_name}: expected an object")
        section = getattr(cfg, section_name)
        known = {f.name: f for f in fields(section)}
        for key, value in section_value.items():
            if key not in known:
                raise ConfigError(f"unknown config key: {section_name}.{key}")
            path = f"{section_name}.{key}"
            if value is None and ((section_name, key) in _OPTIONAL_INT or (section_name, key) in _OPTIONAL_STR):
                setattr(section, key, None)
                continue
            if (section_name, key) in _OPTIONAL_INT:
                setattr(section, key, _check_type(path, value, int))
                continue
            if (section_name, key) in _OPTIONAL_STR:
                setattr(section, key, _check_type(path, value, str))
                continue
            default = getattr(type(section)(), key)
            expected = int if isinstance(default, int) and not isinstance(default, bool) else type(default)
            setattr(section, key, _check_type(path, value, expected))
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    """Cross-field checks shared by file loading and flag overrides."""
    m = cfg.model
    if m.d_model % 2 != 0:
        raise ConfigError(f"model.d_model must be even, got {m.d_model}")
    if m.heads < 1 or m.d_model % m.heads != 0:
        raise ConfigError(f"model.d_model {m.d_model} is not divisible by model.heads {m.heads}")
    if m.layers < 0:
        raise ConfigError(f"model.layers must be >= 0, got {m.layers}")
    for name in ("d_model", "d_ff", "window"):
        if getattr(m, name) < 1:
            raise ConfigError(f"model.{name} must be >= 1")
    for name in ("input_dim", "classes"):
        value = getattr(m, name)
        if value is not None and value < 1:
            raise ConfigError(f"model.{name} must be >= 1 when set")

    d = cfg.data
    if d.classes < 2:
        raise ConfigError(f"data.classes must be >= 2, got {d.classes}")
    if d.per_class < 1:
        raise ConfigError(f"data.per_class must be >= 1, got {d.per_class}")
    if d.dim < 1:
        raise ConfigError(f"data.dim must be >= 1, got {d.dim}")
    if d.noise_sigma < 0:
        raise ConfigError(f"data.noise_sigma must be >= 0, got {d.noise_sigma}")
    if d.hands not in (1, 2):
        raise ConfigError(f"data.hands must be 1 or 2, got {d.hands}")
    if not 0 < d.split_ratio < 1:
        raise ConfigError(f"data.split_ratio must be in (0, 1), got {d.split_ratio}")
    if not 0 < d.val_fraction < 1:
        raise ConfigError(f"data.val_fraction must be in (0, 1), got {d.val_fraction}")

    s = cfg.segmentation
    if s.window < 1:
        raise ConfigError(f"segmentation.window must be >= 1, got {s.window}")
    if s.stride < 1:
        raise ConfigError(f"segmentation.stride must be >= 1, got {s.stride}")
    if not 0 < s.threshold < 1:
        raise ConfigError(f"segmentation.threshold must be in (0, 1), got {s.threshold}")
    if s.n_streams < 1 or s.signs_per_stream < 1:
        raise ConfigError("segmentation.n_streams and signs_per_stream must be >= 1")

    if cfg.threads < 1:
        raise ConfigError(f"threads must be >= 1, got {cfg.threads}")

    # training values are re-validated by TrainConfig itself
    cfg.train_config()
