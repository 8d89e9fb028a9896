"""TOML run configuration and JSON run manifests."""

from __future__ import annotations

import json
import os
import platform
import socket
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .nn import ModelConfig
from .train import TrainConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DATA_DIR_ENV = "COSIM_DATA_DIR"

# TOML section -> {key: ModelConfig field}
_MODEL_KEYS = {
    "encoder": {"kind": "encoder", "k": "k", "features": "features", "feature_cap": "feature_cap",
                "d_encode": "d_encode", "bn_momentum": "bn_momentum", "bn_stats": "bn_stats"},
    "pool": {"enabled": "pooling", "h": "h", "n_pool": "n_pool", "d_pool": "d_pool",
             "norm": "pool_norm", "gamma": "gamma"},
    "match": {"layers": "match_layers", "use_x": "use_x", "use_i": "use_i", "use_m": "use_m",
              "d_final": "d_final", "gat_slope": "gat_slope"},
}
_TRAIN_KEYS = {"iterations", "batch_size", "lr", "optimizer", "beta1", "beta2", "adam_eps",
               "seed", "eval_every", "mode", "theta"}
_RUN_KEYS = {"dataset", "out"}


class ConfigError(ValueError):
    pass


def data_path(path) -> Path:
    """Relative paths resolve under ``$COSIM_DATA_DIR`` when it is set."""
    p = Path(path)
    if p.is_absolute():
        return p
    base = os.environ.get(DATA_DIR_ENV)
    return Path(base) / p if base else p


def parse_config(doc: dict) -> tuple[TrainConfig, dict]:
    """``(TrainConfig, run)`` from a parsed TOML document; ``run`` holds dataset/out paths."""
    unknown = set(doc) - {"train", "run", *_MODEL_KEYS}
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    model = {}
    for section, keys in _MODEL_KEYS.items():
        table = doc.get(section, {})
        bad = set(table) - set(keys)
        if bad:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(bad)}")
        for k, v in table.items():
            model[keys[k]] = v
    train = dict(doc.get("train", {}))
    bad = set(train) - _TRAIN_KEYS
    if bad:
        raise ConfigError(f"unknown keys in [train]: {sorted(bad)}")
    run = dict(doc.get("run", {}))
    bad = set(run) - _RUN_KEYS
    if bad:
        raise ConfigError(f"unknown keys in [run]: {sorted(bad)}")
    if "seed" in train and "seed" not in model:
        model["seed"] = train["seed"]
    try:
        cfg = TrainConfig(model=ModelConfig(**model), **train)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, run


def load_config(path) -> tuple[TrainConfig, dict]:
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(doc)


def manifest_path(output) -> Path:
    out = Path(output)
    return out.with_name(out.name + ".manifest.json")


def write_manifest(output, command: str, config: dict, inputs: list, outputs: list,
                   seeds: dict | None = None, started: float | None = None) -> Path:
    path = manifest_path(output)
    doc = {
        "command": command,
        "config": config,
        "seeds": seeds or {},
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "version": __version__,
        "wall_clock_s": None if started is None else time.time() - started,
        "host": {"hostname": socket.gethostname(), "platform": platform.platform(),
                 "python": platform.python_version()},
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")
    return path


def model_config_dict(cfg: ModelConfig) -> dict:
    return asdict(cfg)
