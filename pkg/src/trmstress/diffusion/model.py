"""Conditional denoising diffusion estimator for normalized stress videos."""

from __future__ import annotations

import copy
import logging
import time

import numpy as np
import torch
import torch.nn.functional as F
from sklearn.base import BaseEstimator

from .._training import EarlyStopping, load_checkpoint, save_checkpoint, state_to_numpy
from .._validation import check_condition_batch, check_finite_array, check_is_fitted, check_scalar
from ..exceptions import ConfigurationError, RejectedInputError, TrainingDivergenceError
from .schedule import DiffusionSchedule, forward_diffuse, make_schedule
from .stunet import STUNet, STUNetConfig

logger = logging.getLogger(__name__)


def train_step(model: STUNet, optimizer, sched: DiffusionSchedule, cond: torch.Tensor, s0: torch.Tensor,
               generator: torch.Generator, grad_clip: float | None = 1.0) -> float:
    """One noise-prediction update on a batch; returns the loss before the step.

    ``cond`` is [B, 5, T, H, W] and ``s0`` is [B, T, H, W].
    """
    B = s0.shape[0]
    t_d = torch.randint(1, sched.T_d + 1, (B,), generator=generator)
    zeta = torch.randn(s0.shape, generator=generator, dtype=s0.dtype)
    s_t = forward_diffuse(s0, t_d.numpy(), zeta, sched)
    pred = model(torch.cat([s_t[:, None], cond], dim=1), t_d)
    loss = F.mse_loss(pred[:, 0], zeta)
    if not torch.isfinite(loss):
        raise TrainingDivergenceError(f"non-finite diffusion loss (t_d={t_d.tolist()})")
    optimizer.zero_grad(set_to_none=True)
    loss.backward()
    if grad_clip:
        torch.nn.utils.clip_grad_norm_(model.parameters(), grad_clip)
    optimizer.step()
    return float(loss.detach())


@torch.no_grad()
def denoising_loss(model: STUNet, sched: DiffusionSchedule, cond: torch.Tensor, s0: torch.Tensor,
                   seed: int = 0, batch_size: int = 8) -> float:
    """Noise-prediction MSE at fixed (seeded) steps and noise; used as the validation error."""
    g = torch.Generator().manual_seed(seed)
    total, n = 0.0, 0
    for i in range(0, s0.shape[0], batch_size):
        c, s = cond[i:i + batch_size], s0[i:i + batch_size]
        t_d = torch.randint(1, sched.T_d + 1, (s.shape[0],), generator=g)
        zeta = torch.randn(s.shape, generator=g, dtype=s.dtype)
        pred = model(torch.cat([forward_diffuse(s, t_d.numpy(), zeta, sched)[:, None], c], 1), t_d)
        total += float(F.mse_loss(pred[:, 0], zeta, reduction="sum"))
        n += zeta.numel()
    return total / n


@torch.no_grad()
def sample(model: STUNet, sched: DiffusionSchedule, cond: torch.Tensor, seed: int = 0,
           clip: float | None = None) -> torch.Tensor:
    """Ancestral sampling from pure noise down to step 0; returns [B, T, H, W].

    With ``clip`` set, each step goes through the implied clean estimate
    clamped to [-clip, clip] and the posterior mean built from it. Without
    clamping the two forms of the update are identical.
    """
    g = torch.Generator().manual_seed(seed)
    B, _, T, H, W = cond.shape
    x = torch.randn((B, T, H, W), generator=g, dtype=cond.dtype)
    alpha, ab = sched.alpha, sched.alpha_bar
    for t in range(sched.T_d, 0, -1):
        eps = model(torch.cat([x[:, None], cond], 1), torch.full((B,), t))[:, 0]
        a, abt = alpha[t - 1], ab[t - 1]
        if clip is None:
            x = (x - (1.0 - a) / np.sqrt(1.0 - abt) * eps) / np.sqrt(a)
        else:
            ab_prev = ab[t - 2] if t > 1 else 1.0
            x0 = ((x - np.sqrt(1.0 - abt) * eps) / np.sqrt(abt)).clamp(-clip, clip)
            x = (np.sqrt(ab_prev) * (1.0 - a) * x0 + np.sqrt(a) * (1.0 - ab_prev) * x) / (1.0 - abt)
        if t > 1:
            x = x + float(sched.sigma(t)) * torch.randn(x.shape, generator=g, dtype=x.dtype)
    return x


class STSDiffusion(BaseEstimator):
    """Conditional diffusion model mapping a condition tensor to a normalized stress video.

    Parameters
    ----------
    attention_positions : tuple of int
        Attention slots (1..7) of the space-time U-Net.
    T_d : int
        Number of diffusion steps.
    learning_rate : float
        Fine-tuning learning rate.
    pretrain_samples, pretrain_epochs, pretrain_learning_rate
        Optional warm-up on a random subset of the training set.
    max_epochs, eval_every, patience
        The validation error is computed every ``eval_every`` epochs and
        training stops after ``patience`` evaluations without improvement.
        The parameters with the lowest validation error are kept.
    clip_denoised : float or None
        Clamp the clean-video estimate to [-c, c] at every sampling step
        (normalized videos lie in [-1, 1]). None gives the plain update.
    magnitude_scale : float or None
        Divisor applied to the load-magnitude channel before it enters the
        network (None: the largest absolute value seen in ``fit``).
    """

    def __init__(self, attention_positions=(1, 2, 3, 4, 5, 6, 7), depth=3, base_channels=64,
                 channel_mults=(1, 2, 4), heads=4, groups=8, T_d=1000, beta_min=1e-4, beta_max=2e-2,
                 learning_rate=1e-9, batch_size=4, max_epochs=1000, eval_every=100, patience=10,
                 grad_clip=1.0, pretrain_samples=None, pretrain_epochs=0, pretrain_learning_rate=1e-4,
                 clip_denoised=None, magnitude_scale=None, max_seconds=None, random_state=0, log_every=10):
        self.attention_positions = attention_positions
        self.depth = depth
        self.base_channels = base_channels
        self.channel_mults = channel_mults
        self.heads = heads
        self.groups = groups
        self.T_d = T_d
        self.beta_min = beta_min
        self.beta_max = beta_max
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.eval_every = eval_every
        self.patience = patience
        self.grad_clip = grad_clip
        self.pretrain_samples = pretrain_samples
        self.pretrain_epochs = pretrain_epochs
        self.pretrain_learning_rate = pretrain_learning_rate
        self.clip_denoised = clip_denoised
        self.magnitude_scale = magnitude_scale
        self.max_seconds = max_seconds
        self.random_state = random_state
        self.log_every = log_every

    # ------------------------------------------------------------------
    def net_config(self) -> STUNetConfig:
        return STUNetConfig(tuple(self.attention_positions), self.depth, self.base_channels,
                            tuple(self.channel_mults), self.heads, groups=self.groups)

    def _prepare(self, X) -> torch.Tensor:
        X = check_condition_batch(X).copy()
        X[:, 4] /= self.magnitude_scale_
        return torch.from_numpy(X)

    @staticmethod
    def _targets(y) -> torch.Tensor:
        y = check_finite_array(y, "s0", dtype=np.float32)
        if y.ndim == 3:
            y = y[None]
        if y.ndim != 4:
            raise RejectedInputError(f"s0 must be [N, T, H, W], got {y.shape}")
        return torch.from_numpy(np.ascontiguousarray(y))

    def _run_epochs(self, model, opt, cond, s0, epochs, rng, gen, stopper=None, val=None, t_start=None):
        n = cond.shape[0]
        bs = min(self.batch_size, n)
        for epoch in range(epochs):
            perm = rng.permutation(n)
            losses = [train_step(model, opt, self.schedule_, cond[perm[i:i + bs]], s0[perm[i:i + bs]],
                                 gen, self.grad_clip)
                      for i in range(0, n, bs)]
            self.train_history_.append(float(np.mean(losses)))
            self.epochs_run_ += 1
            if self.log_every and self.epochs_run_ % self.log_every == 0:
                logger.info("diffusion epoch %d  loss %.4e  (%.0fs)", self.epochs_run_, self.train_history_[-1],
                            time.perf_counter() - t_start)
            if stopper is not None and (epoch + 1) % self.eval_every == 0:
                v = denoising_loss(model, self.schedule_, *val, seed=self.random_state)
                self.val_history_.append((self.epochs_run_, v))
                stop = stopper.update(v)
                if stopper.improved:
                    self.best_state_ = copy.deepcopy(model.state_dict())
                    self.best_epoch_ = self.epochs_run_
                logger.info("diffusion epoch %d  validation %.4e  best %.4e", self.epochs_run_, v, stopper.best)
                if stop:
                    logger.info("early stop after %d evaluations without improvement", self.patience)
                    return True
            if self.max_seconds and time.perf_counter() - t_start > self.max_seconds:
                logger.info("time budget of %.0fs reached at epoch %d", self.max_seconds, self.epochs_run_)
                return True
        return False

    def fit(self, X, y, X_val=None, y_val=None):
        """Train on conditions ``X`` [N, 5, T, H, W] and normalized videos ``y`` [N, T, H, W]."""
        check_scalar(self.batch_size, "batch_size", min_val=1, integer=True)
        check_scalar(self.eval_every, "eval_every", min_val=1, integer=True)
        check_scalar(self.learning_rate, "learning_rate", min_val=0, include_min=False)
        if len(X) == 0:
            raise ConfigurationError("training split is empty")
        Xa = check_condition_batch(X)
        if self.magnitude_scale is None:
            m = float(np.abs(Xa[:, 4]).max())
            self.magnitude_scale_ = m if m > 0 else 1.0
        else:
            self.magnitude_scale_ = float(self.magnitude_scale)
        cond, s0 = self._prepare(Xa), self._targets(y)
        if cond.shape[0] != s0.shape[0] or cond.shape[2:] != s0.shape[1:]:
            raise RejectedInputError("conditions and targets disagree in count or shape")
        if X_val is None or len(X_val) == 0:
            X_val, y_val = X, y
        val = (self._prepare(X_val), self._targets(y_val))

        torch.manual_seed(self.random_state)
        rng = np.random.default_rng(self.random_state)
        gen = torch.Generator().manual_seed(self.random_state)
        self.schedule_ = make_schedule(self.T_d, self.beta_min, self.beta_max)
        model = STUNet(self.net_config())
        self.train_history_, self.val_history_ = [], []
        self.epochs_run_ = 0
        self.best_state_, self.best_epoch_ = None, 0
        t0 = time.perf_counter()

        if self.pretrain_epochs and self.pretrain_samples:
            k = min(int(self.pretrain_samples), cond.shape[0])
            idx = torch.as_tensor(rng.choice(cond.shape[0], k, replace=False))
            opt = torch.optim.Adam(model.parameters(), lr=self.pretrain_learning_rate)
            self._run_epochs(model, opt, cond[idx], s0[idx], self.pretrain_epochs, rng, gen, t_start=t0)

        opt = torch.optim.Adam(model.parameters(), lr=self.learning_rate)
        stopper = EarlyStopping(self.patience)
        self._run_epochs(model, opt, cond, s0, self.max_epochs, rng, gen, stopper, val, t0)
        if self.best_state_ is None or not stopper.history:
            v = denoising_loss(model, self.schedule_, *val, seed=self.random_state)
            self.val_history_.append((self.epochs_run_, v))
            stopper.update(v)
            self.best_state_, self.best_epoch_ = copy.deepcopy(model.state_dict()), self.epochs_run_
        model.load_state_dict(self.best_state_)
        self.model_ = model.eval()
        self.best_val_loss_ = stopper.best
        self.train_seconds_ = time.perf_counter() - t0
        self.n_parameters_ = sum(p.numel() for p in model.parameters())
        return self

    def generate(self, X, seed: int = 0, batch_size: int = 8) -> np.ndarray:
        """Sample normalized videos [N, T, H, W] for conditions ``X``; deterministic in ``seed``."""
        check_is_fitted(self, "model_")
        cond = self._prepare(X)
        out = [sample(self.model_, self.schedule_, cond[i:i + batch_size], seed + i, self.clip_denoised)
               for i in range(0, cond.shape[0], batch_size)]
        return torch.cat(out).numpy()

    predict = generate

    def score(self, X, y, seed: int = 0) -> float:
        """Negative denoising loss (higher is better)."""
        check_is_fitted(self, "model_")
        return -denoising_loss(self.model_, self.schedule_, self._prepare(X), self._targets(y), seed)

    # ------------------------------------------------------------------
    def save(self, path):
        check_is_fitted(self, "model_")
        config = dict(self.get_params(), magnitude_scale_=self.magnitude_scale_, kind="STSDiffusion",
                      best_epoch_=self.best_epoch_, best_val_loss_=self.best_val_loss_)
        return save_checkpoint(path, state_to_numpy(self.model_), config, self.schedule_.beta)

    @classmethod
    def load(cls, path) -> "STSDiffusion":
        state, config, beta, _ = load_checkpoint(path)
        if config.get("kind") != "STSDiffusion":
            raise ConfigurationError(f"{path} is not a diffusion checkpoint")
        params = {k: v for k, v in config.items() if k in cls._get_param_names()}
        est = cls(**params)
        est.magnitude_scale_ = config["magnitude_scale_"]
        est.best_epoch_ = config.get("best_epoch_", 0)
        est.best_val_loss_ = config.get("best_val_loss_", float("nan"))
        est.schedule_ = DiffusionSchedule(beta)
        model = STUNet(est.net_config())
        model.load_state_dict(state)
        est.model_ = model.eval()
        return est
