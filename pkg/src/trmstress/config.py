"""Hierarchical run configuration with desk and paper presets.

A config file is YAML whose keys must already exist in the preset it
overrides; anything else is rejected with the offending dotted key in the
message. The config hash is the SHA-256 of the canonical JSON dump.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import yaml

from .exceptions import ConfigurationError

_BASE = {
    "seed": 0,
    "spectral": {"c1": 0.25, "c2": 0.25, "n1": 32, "n2": 32},
    "microstructure": {"volume_fraction": 0.5, "interface_width": 1, "length": 2.0},
    "grid": {"T": 24, "H": 64, "W": 64},
    "material": {
        "phase1": {"E": 20.6, "nu": 0.2, "rho": 2400.0},
        "phase2": {"E": 206.0, "nu": 0.4, "rho": 7800.0},
    },
    "load": {
        "amplitude_range": [0.5e-3, 2.0e-3],
        "frequency_range": [2.0e5, 5.0e5],
        "span_range": [0.4, 1.0],
        "center_range": [0.3, 0.7],
        "duration": 4.0e-6,
        "n_steps": 401,
        "n_edge": 257,
    },
    "fem": {"cfl": 1.0},
    "dataset": {"n_samples": 2000, "ratios": [8, 1, 1]},
    "diffusion": {
        "attention_positions": [1, 2, 3, 4, 5, 6, 7],
        "depth": 3, "base_channels": 64, "channel_mults": [1, 2, 4], "heads": 4, "groups": 8,
        "T_d": 1000, "beta_min": 1.0e-4, "beta_max": 2.0e-2,
        "learning_rate": 1.0e-9, "batch_size": 4, "max_epochs": 100000, "eval_every": 100,
        "patience": 10, "grad_clip": 1.0,
        "pretrain_samples": 100, "pretrain_epochs": 1000, "pretrain_learning_rate": 1.0e-4,
        "clip_denoised": None, "max_seconds": None,
    },
    "auxnet": {
        "channels": [16, 32], "kernel": 3, "pool": [2, 2, 2], "heads": 4, "hidden": 64,
        "learning_rate": 1.0e-3, "weight_decay": 0.0, "batch_size": 8, "max_epochs": 500,
        "eval_every": 5, "patience": 10,
    },
    "srpinn": {
        "u_layers": 12, "s_layers": 16, "width": 64, "omega_op": 1.0, "omega_pi": 5.0,
        "epochs": 1000, "learning_rate": 1.0e-3, "lr_decay": None, "n_collocation": 4096,
        "n_boundary": 512, "obs_batch_size": 8192, "dtype": "float32",
    },
    "superres": {
        "factors": [[1.25, 1, 1], [1.25, 2, 2], [1.25, 4, 4], [2.5, 1, 1], [2.5, 2, 2], [2.5, 4, 4]],
        "sample": 0,
        "plots": True,
    },
    "ablation": {
        "configurations": [[], [1], [1, 7], [1, 2, 6, 7], [1, 2, 3, 5, 6, 7], [1, 2, 3, 4, 5, 6, 7]],
    },
    "sweep": {"ratios": [[5, 1], [2, 1], [1, 1], [1, 2], [1, 5]]},
    "generation": {"seed": 0, "batch_size": 8},
}

_DESK = {
    "grid": {"T": 16, "H": 32, "W": 32},
    "dataset": {"n_samples": 64},
    "diffusion": {
        "base_channels": 16, "heads": 2, "T_d": 200, "beta_min": 5.0e-4, "beta_max": 0.1,
        "learning_rate": 1.0e-3, "max_epochs": 60,
        "eval_every": 2, "pretrain_samples": None, "pretrain_epochs": 0, "max_seconds": 3000,
        "clip_denoised": 1.0,
    },
    "ablation": {"configurations": [[], [1, 2, 3, 4, 5, 6, 7]]},
}

PRESETS = ("desk", "paper")


def _merge(base: dict, override: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ConfigurationError(f"unknown config key {path!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigurationError(f"config key {path!r} must be a mapping")
            out[key] = _merge(base[key], val, path + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def preset(name: str = "desk") -> dict:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {PRESETS}")
    return _merge(_BASE, _DESK) if name == "desk" else copy.deepcopy(_BASE)


def load_config(path=None, preset_name: str = "desk", seed: int | None = None,
                overrides: dict | None = None) -> dict:
    """Preset, then the YAML file at ``path``, then ``overrides``, then ``seed``."""
    cfg = preset(preset_name)
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigurationError(f"config file {p} not found")
        try:
            data = yaml.safe_load(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"cannot parse {p}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"{p} must contain a mapping at top level")
        cfg = _merge(cfg, data)
    if overrides:
        cfg = _merge(cfg, overrides)
    if seed is not None:
        cfg["seed"] = int(seed)
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    g = cfg["grid"]
    for k in ("T", "H", "W"):
        if not isinstance(g[k], int) or g[k] < 1:
            raise ConfigurationError(f"grid.{k} must be a positive integer")
    vf = cfg["microstructure"]["volume_fraction"]
    if not 0 < vf < 1:
        raise ConfigurationError("microstructure.volume_fraction must lie in (0, 1)")
    if cfg["dataset"]["n_samples"] < 1:
        raise ConfigurationError("dataset.n_samples must be >= 1")
    for r in cfg["sweep"]["ratios"]:
        if len(r) != 2 or min(r) < 0 or max(r) == 0:
            raise ConfigurationError(f"invalid weight ratio {r}")
    for f in cfg["superres"]["factors"]:
        if len(f) != 3 or min(f) <= 0:
            raise ConfigurationError(f"super-resolution factors must be three positive numbers, got {f}")


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON form (sorted keys, no whitespace)."""
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def data_hash(cfg: dict) -> str:
    """Hash of the sections that determine dataset contents (training settings excluded)."""
    keys = ("seed", "spectral", "microstructure", "grid", "material", "load", "fem", "dataset")
    return config_hash({k: cfg[k] for k in keys})


def dump(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True)
