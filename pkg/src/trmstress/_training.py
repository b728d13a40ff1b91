"""Early stopping and checkpoint files shared by the trainable estimators.

A checkpoint is one ``.npz`` holding ``param/<name>`` arrays, a JSON
config echo under ``config_json`` and, for diffusion models, the noise
schedule under ``schedule_beta``.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
import torch

from .exceptions import DatasetIntegrityError


class EarlyStopping:
    """Stop once ``patience`` consecutive evaluations fail to beat the best value."""

    def __init__(self, patience: int = 10):
        self.patience = patience
        self.best = float("inf")
        self.best_index = -1
        self.count = 0
        self.history = []

    def update(self, value: float) -> bool:
        """Record one evaluation; returns True when training should stop."""
        self.history.append(float(value))
        if value < self.best:
            self.best = float(value)
            self.best_index = len(self.history) - 1
            self.count = 0
        else:
            self.count += 1
        return self.count >= self.patience

    @property
    def improved(self) -> bool:
        return self.best_index == len(self.history) - 1


def state_to_numpy(module: torch.nn.Module) -> dict:
    return {k: v.detach().cpu().numpy().copy() for k, v in module.state_dict().items()}


def save_checkpoint(path, state: dict, config: dict, schedule_beta=None, extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {f"param/{k}": np.asarray(v) for k, v in state.items()}
    arrays["config_json"] = np.array(json.dumps(config, sort_keys=True, default=_jsonable))
    if schedule_beta is not None:
        arrays["schedule_beta"] = np.asarray(schedule_beta, dtype=np.float64)
    for k, v in (extra or {}).items():
        arrays[f"extra/{k}"] = np.asarray(v)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    os.replace(tmp, path)
    return path


def load_checkpoint(path):
    """Returns (state dict of tensors, config dict, schedule beta or None, extra dict)."""
    path = Path(path)
    if not path.exists():
        raise DatasetIntegrityError(str(path), "checkpoint not found")
    try:
        with np.load(path, allow_pickle=False) as z:
            state = {k[6:]: torch.from_numpy(z[k].copy()) for k in z.files if k.startswith("param/")}
            config = json.loads(str(z["config_json"]))
            beta = z["schedule_beta"].copy() if "schedule_beta" in z.files else None
            extra = {k[6:]: z[k].copy() for k in z.files if k.startswith("extra/")}
    except (OSError, ValueError, KeyError) as exc:
        raise DatasetIntegrityError(str(path), f"unreadable checkpoint ({exc})") from exc
    return state, config, beta, extra


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (tuple, set, np.ndarray)):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o)}")
