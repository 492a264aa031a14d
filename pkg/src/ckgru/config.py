"""Run configuration: flat ``key = value`` sections, strict validation.

Every hyperparameter default is the published training setup (learning
rate 0.005, L2 0.005, dropout 0.5, 40 epochs, batch 128, two hidden
layers of 50).  An empty config file is a valid, runnable configuration
on synthetic data.
"""

import configparser
from dataclasses import dataclass, fields

from .features import parse_selection


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # [data]
    dataset: str = ""
    # [model]
    d_w: int = 50
    d_c: int = 100
    h: int = 50
    d_red: int = 32
    gcm_iterations: int = 2
    gcm_residual: bool = True
    candidate_combine: str = "sum"
    # [train]
    lr: float = 0.005
    l2: float = 0.005
    dropout: float = 0.5
    epochs: int = 40
    batch: int = 128
    seed: int = 42
    # [features]
    metadata_selection: str = "F1-F8"
    normalize_scope: str = "train_only"
    pos_size: int = 17
    dep_size: int = 10
    max_len: int = 200
    # [resources]
    emoji_map: str = ""
    contractions: str = ""
    dictionary: str = ""
    vad_lexicon: str = ""
    concept_lexicon: str = ""
    bingliu_positive: str = ""
    bingliu_negative: str = ""
    embeddings: str = ""

    def validate(self):
        positive_ints = ("d_w", "d_c", "h", "d_red", "gcm_iterations",
                         "epochs", "batch", "pos_size", "dep_size", "max_len")
        for name in positive_ints:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.l2 < 0:
            raise ConfigError(f"l2 must be non-negative, got {self.l2}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.candidate_combine not in ("sum", "mean"):
            raise ConfigError(f"candidate_combine must be sum or mean, got {self.candidate_combine!r}")
        if self.normalize_scope not in ("train_only", "global"):
            raise ConfigError(f"normalize_scope must be train_only or global, got {self.normalize_scope!r}")
        try:
            parse_selection(self.metadata_selection)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self


_SECTIONS = {
    "data": ("dataset",),
    "model": ("d_w", "d_c", "h", "d_red", "gcm_iterations", "gcm_residual",
              "candidate_combine"),
    "train": ("lr", "l2", "dropout", "epochs", "batch", "seed"),
    "features": ("metadata_selection", "normalize_scope", "pos_size",
                 "dep_size", "max_len"),
    "resources": ("emoji_map", "contractions", "dictionary", "vad_lexicon",
                  "concept_lexicon", "bingliu_positive", "bingliu_negative",
                  "embeddings"),
}

_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(name, raw):
    kind = _FIELD_TYPES[name]
    raw = raw.strip()
    try:
        if kind in (int, "int"):
            return int(raw)
        if kind in (float, "float"):
            return float(raw)
        if kind in (bool, "bool"):
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config(text, source="<config>"):
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    cfg = RunConfig()
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            setattr(cfg, key, _parse_value(key, raw))
    return cfg.validate()


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), source=str(path))


def serialize_config(cfg):
    lines = []
    for section, keys in _SECTIONS.items():
        lines.append(f"[{section}]")
        for key in keys:
            value = getattr(cfg, key)
            if isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_config(cfg))
