"""Run configuration files.

INI-style sections with flat key=value pairs. Every key must belong to the
schema of its section; unknown sections or keys are an error naming the
offender, not a warning. Command-line flags override file values.

Sections: [synth] and [model] and [train] mirror the fields of SynthConfig,
ModelConfig and TrainConfig; [data] points at input files.
"""

import configparser
import os
from dataclasses import fields

from .errors import ConfigError, ContractError
from .model import ModelConfig
from .synth import SynthConfig
from .trainer import TrainConfig

_BOOL_WORDS = {
    "1": True, "true": True, "yes": True, "on": True,
    "0": False, "false": False, "no": False, "off": False,
}

DATA_KEYS = {
    "expression": str,
    "labels": str,
    "splits": str,
    "gene_sets": str,
    "patch_dir": str,
    "coverage": float,
}


def _schema_of(dc) -> dict:
    # every config dataclass defaults all fields, so the default's type is
    # the field's type
    return {f.name: type(f.default) for f in fields(dc)}


SECTIONS = {
    "synth": _schema_of(SynthConfig),
    "model": _schema_of(ModelConfig),
    "train": _schema_of(TrainConfig),
    "data": DATA_KEYS,
}


def _coerce(section: str, key: str, raw: str, kind):
    text = raw.strip()
    if kind is bool:
        try:
            return _BOOL_WORDS[text.lower()]
        except KeyError:
            raise ConfigError(
                f"[{section}] {key}: expected a boolean, got {raw!r}"
            ) from None
    if kind is int:
        try:
            return int(text)
        except ValueError:
            raise ConfigError(
                f"[{section}] {key}: expected an integer, got {raw!r}"
            ) from None
    if kind is float:
        try:
            return float(text)
        except ValueError:
            raise ConfigError(
                f"[{section}] {key}: expected a number, got {raw!r}"
            ) from None
    return text


def load_config(path) -> dict:
    """Parse and validate a config file into {section: {key: value}}."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    cfg: dict = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(
                f"{path}: unknown section [{section}]; expected one of "
                + ", ".join(sorted(SECTIONS))
            )
        schema = SECTIONS[section]
        out = {}
        for key, raw in parser.items(section):
            if key not in schema:
                raise ConfigError(
                    f"{path}: unknown key {key!r} in section [{section}]"
                )
            out[key] = _coerce(section, key, raw, schema[key])
        cfg[section] = out
    return cfg


def apply_overrides(cfg: dict, section: str, **pairs) -> dict:
    """Merge non-None flag values over the file values, validating keys."""
    schema = SECTIONS[section]
    out = cfg.setdefault(section, {})
    for key, value in pairs.items():
        if value is None:
            continue
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} for section [{section}]")
        out[key] = value
    return cfg


def _build(section: str, cls, cfg: dict):
    try:
        return cls(**cfg.get(section, {}))
    except ContractError as exc:
        # bad values are a configuration problem when they come from config
        raise ConfigError(f"[{section}]: {exc}") from None


def build_synth_config(cfg: dict) -> SynthConfig:
    return _build("synth", SynthConfig, cfg)


def build_model_config(cfg: dict) -> ModelConfig:
    return _build("model", ModelConfig, cfg)


def build_train_config(cfg: dict) -> TrainConfig:
    return _build("train", TrainConfig, cfg)


def require_data_keys(cfg: dict, keys) -> dict:
    """All of `keys` must be present in [data]; returns the section."""
    data = cfg.get("data", {})
    missing = [k for k in keys if k not in data]
    if missing:
        raise ConfigError(
            "missing required data settings: " + ", ".join(sorted(missing))
        )
    return data
