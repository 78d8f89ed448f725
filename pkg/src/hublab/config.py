"""Flat run configuration: defaults, file merging, validation, digests.

Every command resolves its configuration to the full key set below (file
values, then command-line overrides, on top of defaults), rejects unknown
keys, and stamps the resolved mapping into each artifact it writes. The
artifacts directory is named by a digest of the resolved configuration so
distinct runs never overwrite each other.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .errors import ConfigError
from .trainer import TrainConfig

FORMAT_VERSION = 1

DEFAULTS: dict = {
    # training
    "kappa": 0.1,
    "beta": 0.5,
    "epsilon_sinkhorn": 0.05,
    "sinkhorn_tol": 1e-6,
    "sinkhorn_max_iter": 2000,
    "temperature": 1.0,
    "k_neighbors": 20,
    "bank_capacity": 10240,
    "learning_rate": 1e-3,
    "epochs": 10,
    "batch_size": 128,
    "seed": 0,
    "grad_mode": "exact",
    "normalize_weights": True,
    "model": "embedding-table",
    "use_wti": True,
    "use_nbi": True,
    "use_opt": True,
    "use_kl": True,
    "neighbor_pool": "batch",
    # metrics
    "k": 15,
    "hub_size_factor": 2.0,
    "atkinson_epsilon": 0.5,
    "probe_threshold": 0.5,
    # synthetic data
    "n_pairs": 1000,
    "dim": 64,
    "hub_fraction": 0.1,
    "contraction": 0.5,
    "noise": 1.0,
    # retrieval
    "mode": "simi",
    # io paths
    "queries": None,
    "galleries": None,
    "texts": None,
    "labels": None,
    "bank": None,
}

_PATH_KEYS = ("queries", "galleries", "texts", "labels", "bank")
_STRING_KEYS = ("grad_mode", "model", "neighbor_pool", "mode")
_BOOL_KEYS = ("normalize_weights", "use_wti", "use_nbi", "use_opt", "use_kl")
_INT_KEYS = ("sinkhorn_max_iter", "k_neighbors", "bank_capacity", "epochs",
             "batch_size", "seed", "k", "n_pairs", "dim")


def _check_type(key: str, value):
    if key in _PATH_KEYS:
        if value is not None and not isinstance(value, str):
            raise ConfigError(f"{key} must be a path string or null")
        return value
    if key in _STRING_KEYS:
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string")
        return value
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be a boolean")
        return value
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number")
    return float(value)


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return raw


def resolve_config(file_config: dict | None = None,
                   overrides: dict | None = None) -> dict:
    """Merge defaults, a config file, and CLI overrides into the full map."""
    resolved = dict(DEFAULTS)
    for source in (file_config or {}, overrides or {}):
        for key, value in source.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            if value is None and key not in _PATH_KEYS:
                continue
            resolved[key] = _check_type(key, value)
    return resolved


def config_digest(command: str, resolved: dict) -> str:
    blob = json.dumps({"command": command, "config": resolved},
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def train_config_from(resolved: dict) -> TrainConfig:
    return TrainConfig(
        kappa=resolved["kappa"],
        beta=resolved["beta"],
        epsilon_sinkhorn=resolved["epsilon_sinkhorn"],
        sinkhorn_tol=resolved["sinkhorn_tol"],
        sinkhorn_max_iter=resolved["sinkhorn_max_iter"],
        temperature=resolved["temperature"],
        k_neighbors=resolved["k_neighbors"],
        bank_capacity=resolved["bank_capacity"],
        learning_rate=resolved["learning_rate"],
        epochs=resolved["epochs"],
        batch_size=resolved["batch_size"],
        seed=resolved["seed"],
        grad_mode=resolved["grad_mode"],
        normalize_weights=resolved["normalize_weights"],
        model=resolved["model"],
        use_wti=resolved["use_wti"],
        use_nbi=resolved["use_nbi"],
        use_opt=resolved["use_opt"],
        use_kl=resolved["use_kl"],
        neighbor_pool=resolved["neighbor_pool"],
        report_k=resolved["k"],
        hub_size_factor=resolved["hub_size_factor"],
        atkinson_epsilon=resolved["atkinson_epsilon"],
    )
