"""Regressor for the stress extrema (s_max, s_min) of a sample, given only its condition tensor."""

from __future__ import annotations

import copy
import logging
import time
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from sklearn.base import BaseEstimator, RegressorMixin
from torch import nn

from ._training import EarlyStopping, load_checkpoint, save_checkpoint, state_to_numpy
from ._validation import check_condition_batch, check_finite_array, check_is_fitted, check_scalar
from .exceptions import ConfigurationError, RejectedInputError, TrainingDivergenceError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AuxNetConfig:
    channels: tuple = (16, 32)
    kernel: int = 3
    pool: tuple = (2, 2, 2)
    heads: int = 4
    hidden: int = 64
    in_channels: int = 5

    def __post_init__(self):
        if len(self.channels) != 2:
            raise ConfigurationError("auxnet uses exactly two convolution stages")
        if self.channels[-1] % self.heads:
            raise ConfigurationError("last stage width must be divisible by the head count")


class AuxNet(nn.Module):
    """conv-ReLU-pool x2, tokens, self-attention, mean pool, two linear layers, ordered pair."""

    def __init__(self, config: AuxNetConfig | None = None):
        super().__init__()
        cfg = config or AuxNetConfig()
        self.config = cfg
        c1, c2 = cfg.channels
        pad = cfg.kernel // 2
        self.conv1 = nn.Conv3d(cfg.in_channels, c1, cfg.kernel, padding=pad)
        self.conv2 = nn.Conv3d(c1, c2, cfg.kernel, padding=pad)
        self.pool = nn.MaxPool3d(cfg.pool, ceil_mode=True)
        self.attn = nn.MultiheadAttention(c2, cfg.heads, batch_first=True)
        self.fc1 = nn.Linear(c2, cfg.hidden)
        self.fc2 = nn.Linear(cfg.hidden, 2)

    def raw(self, x: torch.Tensor) -> torch.Tensor:
        h = self.pool(F.relu(self.conv1(x)))
        h = self.pool(F.relu(self.conv2(h)))
        tok = h.flatten(2).transpose(1, 2)              # [B, L, C]
        a, _ = self.attn(tok, tok, tok, need_weights=False)
        return self.fc2(F.relu(self.fc1((tok + a).mean(dim=1))))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """[B, 5, T, H, W] -> [B, 2] as (max, min), ordered by construction."""
        if x.ndim != 5 or x.shape[1] != self.config.in_channels:
            raise RejectedInputError(f"expected [B, {self.config.in_channels}, T, H, W], got {tuple(x.shape)}")
        r = self.raw(x)
        return torch.stack([r.max(dim=1).values, r.min(dim=1).values], dim=1)


class ExtremaRegressor(RegressorMixin, BaseEstimator):
    """Predicts (s_max, s_min) in MPa.

    Targets are divided by a scale fixed at ``fit`` time (their largest
    magnitude) and the load-magnitude channel by its own scale, so the
    network sees O(1) numbers.
    """

    def __init__(self, channels=(16, 32), kernel=3, pool=(2, 2, 2), heads=4, hidden=64,
                 learning_rate=1e-3, weight_decay=0.0, batch_size=8, max_epochs=500, eval_every=5,
                 patience=10, random_state=0, log_every=50):
        self.channels = channels
        self.kernel = kernel
        self.pool = pool
        self.heads = heads
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.eval_every = eval_every
        self.patience = patience
        self.random_state = random_state
        self.log_every = log_every

    def net_config(self) -> AuxNetConfig:
        return AuxNetConfig(tuple(self.channels), self.kernel, tuple(self.pool), self.heads, self.hidden)

    def _inputs(self, X) -> torch.Tensor:
        X = check_condition_batch(X).copy()
        X[:, 4] /= self.magnitude_scale_
        return torch.from_numpy(X)

    def _targets(self, y) -> torch.Tensor:
        y = check_finite_array(y, "extrema", ndim=2)
        if y.shape[1] != 2:
            raise RejectedInputError("extrema must be [N, 2] as (s_max, s_min)")
        if np.any(y[:, 0] < y[:, 1]):
            raise RejectedInputError("every s_max must be >= s_min")
        return torch.as_tensor(y / self.target_scale_, dtype=torch.float32)

    def _val_loss(self, model, X, y) -> float:
        with torch.no_grad():
            return float(F.mse_loss(model(X), y))

    def fit(self, X, y, X_val=None, y_val=None):
        """``X`` [N, 5, T, H, W] conditions, ``y`` [N, 2] extrema (s_max, s_min) in MPa."""
        check_scalar(self.eval_every, "eval_every", min_val=1, integer=True)
        if len(X) == 0:
            raise ConfigurationError("training set is empty")
        Xa = check_condition_batch(X)
        ya = check_finite_array(y, "extrema", ndim=2)
        m = float(np.abs(Xa[:, 4]).max())
        self.magnitude_scale_ = m if m > 0 else 1.0
        t = float(np.abs(ya).max())
        self.target_scale_ = t if t > 0 else 1.0
        Xt, yt = self._inputs(Xa), self._targets(ya)
        if X_val is None or len(X_val) == 0:
            Xv, yv = Xt, yt
        else:
            Xv, yv = self._inputs(X_val), self._targets(y_val)

        torch.manual_seed(self.random_state)
        rng = np.random.default_rng(self.random_state)
        model = AuxNet(self.net_config())
        opt = torch.optim.Adam(model.parameters(), lr=self.learning_rate, weight_decay=self.weight_decay)
        stopper = EarlyStopping(self.patience)
        best = copy.deepcopy(model.state_dict())
        self.train_history_, self.val_history_ = [], []
        n, bs = Xt.shape[0], min(self.batch_size, Xt.shape[0])
        t0 = time.perf_counter()
        for epoch in range(1, self.max_epochs + 1):
            perm = rng.permutation(n)
            losses = []
            for i in range(0, n, bs):
                idx = perm[i:i + bs]
                loss = F.mse_loss(model(Xt[idx]), yt[idx])
                if not torch.isfinite(loss):
                    raise TrainingDivergenceError(f"non-finite auxnet loss at epoch {epoch}")
                opt.zero_grad(set_to_none=True)
                loss.backward()
                opt.step()
                losses.append(float(loss.detach()))
            self.train_history_.append(float(np.mean(losses)))
            if epoch % self.eval_every == 0 or epoch == self.max_epochs:
                v = self._val_loss(model, Xv, yv)
                self.val_history_.append((epoch, v))
                stop = stopper.update(v)
                if stopper.improved:
                    best = copy.deepcopy(model.state_dict())
                    self.best_epoch_ = epoch
                if self.log_every and epoch % self.log_every == 0:
                    logger.info("auxnet epoch %d  train %.3e  val %.3e", epoch, losses[-1], v)
                if stop:
                    break
        model.load_state_dict(best)
        self.model_ = model.eval()
        self.best_val_loss_ = stopper.best
        self.epochs_run_ = epoch
        self.train_seconds_ = time.perf_counter() - t0
        return self

    def predict(self, X) -> np.ndarray:
        """[N, 2] predicted (s_max, s_min) in MPa, s_min <= s_max."""
        check_is_fitted(self, "model_")
        with torch.no_grad():
            return self.model_(self._inputs(X)).double().numpy() * self.target_scale_

    def divisor(self, X) -> np.ndarray:
        """max(|s_max|, |s_min|) per sample, the only quantity denormalization consumes."""
        return np.abs(self.predict(X)).max(axis=1)

    def save(self, path):
        check_is_fitted(self, "model_")
        config = dict(self.get_params(), magnitude_scale_=self.magnitude_scale_,
                      target_scale_=self.target_scale_, kind="ExtremaRegressor")
        return save_checkpoint(path, state_to_numpy(self.model_), config)

    @classmethod
    def load(cls, path) -> "ExtremaRegressor":
        state, config, _, _ = load_checkpoint(path)
        if config.get("kind") != "ExtremaRegressor":
            raise ConfigurationError(f"{path} is not an auxnet checkpoint")
        est = cls(**{k: v for k, v in config.items() if k in cls._get_param_names()})
        est.magnitude_scale_ = config["magnitude_scale_"]
        est.target_scale_ = config["target_scale_"]
        model = AuxNet(est.net_config())
        model.load_state_dict(state)
        est.model_ = model.eval()
        return est


def divisor_relative_error(pred_extrema, true_extrema) -> np.ndarray:
    """|max|pred| - max|true|| / max|true| per sample."""
    p = np.abs(np.asarray(pred_extrema, dtype=float)).max(axis=1)
    t = np.abs(np.asarray(true_extrema, dtype=float)).max(axis=1)
    return np.abs(p - t) / t


__all__ = ["AuxNet", "AuxNetConfig", "ExtremaRegressor", "divisor_relative_error"]
