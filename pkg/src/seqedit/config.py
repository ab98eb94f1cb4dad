"""Run configuration: sectioned ``key = value`` files, validation, seed derivation."""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    def __init__(self, msg: str, key: str | None = None):
        super().__init__(msg)
        self.key = key


@dataclass
class PathsSection:
    dump: str = ""  # raw annotation dump; curated on the fly when set
    pairs: str = ""  # curated pair TSV used for pretraining
    heldout: str = ""  # optional held-out pairs for retrieval logging
    edit_pairs: str = ""  # (sequence, instruction) pairs for the editor stage
    run_dir: str = "runs/default"


@dataclass
class ModelSection:
    protein_layers: int = 4
    text_layers: int = 4
    model_dim: int = 256
    heads: int = 4
    projection_dim: int = 128
    protein_max_len: int = 1024
    text_max_len: int = 512
    text_vocab_size: int = 2000
    editor_layers: int = 4
    editor_heads: int = 4
    dtype: str = "float32"


@dataclass
class TrainSection:
    seed: int = 0
    batch_size: int = 32
    epochs: int = 10
    lr: float = 5e-5
    warmup_steps: int = 2000
    tau: float = 0.01
    editor_batch_size: int = 32
    editor_epochs: int = 10
    editor_lr: float = 5e-5
    editor_warmup_steps: int = 2000
    label_smoothing: float = 0.1
    hinge_margin: float = 0.0
    sim_weight: float = 1.0
    relaxation: str = "expected"
    uncond_prob: float = 0.0


@dataclass
class FilterSection:
    min_coverage: float = 0.4
    max_evidence: int = 3


@dataclass
class SamplingSection:
    mode: str = "greedy"
    temperature: float = 1.0
    top_k: int = 0
    samples: int = 1


@dataclass
class AblationSection:
    use_filter: bool = True
    use_pretraining: bool = True
    use_film: bool = True


SECTIONS = {
    "paths": PathsSection,
    "model": ModelSection,
    "train": TrainSection,
    "filter": FilterSection,
    "sampling": SamplingSection,
    "ablation": AblationSection,
}

_RANGES = {
    ("train", "lr"): (0.0, None),
    ("train", "editor_lr"): (0.0, None),
    ("train", "tau"): (0.0, None),
    ("train", "label_smoothing"): (0.0, 1.0),
    ("train", "uncond_prob"): (0.0, 1.0),
    ("filter", "min_coverage"): (0.0, 1.0),
    ("sampling", "temperature"): (0.0, None),
}
_POSITIVE = ("lr", "editor_lr", "tau", "temperature")
_CHOICES = {
    ("train", "relaxation"): ("expected", "straight_through"),
    ("sampling", "mode"): ("greedy", "temperature", "top_k"),
    ("model", "dtype"): ("float32", "float64"),
}


@dataclass
class RunConfig:
    paths: PathsSection = field(default_factory=PathsSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    filter: FilterSection = field(default_factory=FilterSection)
    sampling: SamplingSection = field(default_factory=SamplingSection)
    ablation: AblationSection = field(default_factory=AblationSection)

    def set(self, section: str, key: str, raw: str) -> None:
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section [{section}]", section)
        obj = getattr(self, section)
        types = {f.name: f.type for f in fields(obj)}
        if key not in types:
            raise ConfigError(f"unknown config key {section}.{key}", f"{section}.{key}")
        setattr(obj, key, _coerce(raw, getattr(obj, key), f"{section}.{key}"))

    def validate(self) -> "RunConfig":
        for section in SECTIONS:
            obj = getattr(self, section)
            for f in fields(obj):
                value = getattr(obj, f.name)
                key = f"{section}.{f.name}"
                if isinstance(value, int) and not isinstance(value, bool) and f.name not in ("seed", "top_k"):
                    if value < 1:
                        raise ConfigError(f"{key} must be >= 1, got {value}", key)
                if (section, f.name) in _RANGES:
                    lo, hi = _RANGES[(section, f.name)]
                    if value < lo or (hi is not None and value > hi) or (f.name in _POSITIVE and value <= 0):
                        raise ConfigError(f"{key} out of range: {value}", key)
                if (section, f.name) in _CHOICES and value not in _CHOICES[(section, f.name)]:
                    raise ConfigError(f"{key} must be one of {_CHOICES[(section, f.name)]}, got {value!r}", key)
        if self.model.model_dim % self.model.heads:
            raise ConfigError("model.model_dim must be divisible by model.heads", "model.heads")
        if self.model.model_dim % self.model.editor_heads:
            raise ConfigError("model.model_dim must be divisible by model.editor_heads", "model.editor_heads")
        if self.sampling.top_k < 0:
            raise ConfigError("sampling.top_k must be >= 0", "sampling.top_k")
        return self

    def to_text(self) -> str:
        out = io.StringIO()
        for section in SECTIONS:
            out.write(f"[{section}]\n")
            obj = getattr(self, section)
            for f in fields(obj):
                out.write(f"{f.name} = {_format(getattr(obj, f.name))}\n")
            out.write("\n")
        return out.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


def _coerce(raw: str, default, key: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}", key) from None
    return raw


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str, overrides: dict[str, str] | None = None) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    parser.optionxform = str  # keep key case so typos are reported verbatim
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    cfg = RunConfig()
    for section in parser.sections():
        for key, raw in parser.items(section):
            cfg.set(section, key, raw)
    for dotted, raw in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        cfg.set(section, key, raw)
    return cfg.validate()


def load_config(path, overrides: dict[str, str] | None = None) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), overrides)


def derive_seed(master: int, label: str) -> int:
    """Stage seed from the master seed by labeled hashing."""
    digest = hashlib.sha256(f"{int(master)}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1
