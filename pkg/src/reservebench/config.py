# src/reservebench/config.py
from __future__ import annotations

import json
import os
import sys
from pathlib import Path
from typing import Any

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .harness import StudyConfig
from .models import GAMMA_CASE_STUDY

DEFAULTS: dict[str, Any] = {
    "threads": 1,
    "preset": "desk",
    "residual_adjustment": "paper",
    "unifnorm_variance": "squared",
    "pit_bins": 20,
    "energy_beta": 0.5,
    "failure_threshold": 0.5,
}

# user defaults that are also StudyConfig fields
STUDY_KEYS = ("residual_adjustment", "unifnorm_variance", "pit_bins", "energy_beta",
              "failure_threshold")

THREADS_ENV = "RESERVE_BENCH_THREADS"


def config_dir() -> Path:
    xdg = os.environ.get("XDG_CONFIG_HOME")
    base = Path(xdg) if xdg else Path.home() / ".config"
    return base / "reservebench"


def config_path() -> Path:
    return config_dir() / "config.toml"


def load_config() -> dict[str, Any]:
    p = config_path()
    if not p.exists():
        return DEFAULTS.copy()
    try:
        with p.open("rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{p}: {e}") from None
    # fill missing defaults
    cfg = DEFAULTS.copy()
    cfg.update({k: v for k, v in data.items() if k in DEFAULTS})
    return cfg


def save_config(cfg: dict[str, Any]) -> None:
    d = config_dir()
    d.mkdir(parents=True, exist_ok=True)
    with config_path().open("wb") as f:
        tomli_w.dump(cfg, f)


def set_key(key: str, value: str) -> None:
    cfg = load_config()
    if key not in DEFAULTS:
        raise KeyError(f"Unknown key: {key}. Valid keys: {', '.join(DEFAULTS)}")
    cfg[key] = _cast_value(value, type(DEFAULTS[key]))
    save_config(cfg)


def get_key(key: str) -> Any:
    cfg = load_config()
    if key not in DEFAULTS:
        raise KeyError(f"Unknown key: {key}. Valid keys: {', '.join(DEFAULTS)}")
    return cfg[key]


def reset_config() -> None:
    save_config(DEFAULTS.copy())


def _cast_value(v: str, t: type) -> Any:
    if t is bool:
        return v.lower() in {"1", "true", "yes", "on"}
    try:
        if t is int:
            return int(v)
        if t is float:
            return float(v)
    except ValueError:
        raise ConfigError(f"expected {t.__name__}, got {v!r}") from None
    return v  # str or other


def resolve_threads(cli_value: int | None, user: dict[str, Any] | None = None) -> int:
    """--threads, then $RESERVE_BENCH_THREADS, then the user default."""
    if cli_value is not None:
        threads = cli_value
    elif os.environ.get(THREADS_ENV):
        try:
            threads = int(os.environ[THREADS_ENV])
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from None
    else:
        threads = int((user or load_config())["threads"])
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    return threads


def read_json(path: Path) -> Any:
    try:
        with path.open("r", encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno}: {e.msg}") from None


def load_study_config(
    path: Path | None = None,
    *,
    user: dict[str, Any] | None = None,
    preset: str | None = None,
    overrides: dict[str, Any] | None = None,
) -> StudyConfig:
    """Merge built-in defaults < user defaults < JSON file < preset < overrides.

    Without a file the built-in Gamma case-study generator is used.
    """
    user = load_config() if user is None else user
    merged: dict[str, Any] = {"generator": GAMMA_CASE_STUDY}
    merged.update({k: user[k] for k in STUDY_KEYS if k in user})
    user_preset = str(user.get("preset", DEFAULTS["preset"]))

    doc: dict[str, Any] = {}
    if path is not None:
        doc = read_json(path)
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: study config must be a JSON object")
    merged.update(doc)

    cfg = StudyConfig.from_dict(merged)
    if preset is not None:
        cfg = cfg.with_preset(preset)
    elif "n_scenarios" not in doc and "m_draws" not in doc:
        cfg = cfg.with_preset(user_preset)

    if overrides:
        doc = cfg.to_dict()
        doc.update({k: v for k, v in overrides.items() if v is not None})
        cfg = StudyConfig.from_dict(doc)
    return cfg
