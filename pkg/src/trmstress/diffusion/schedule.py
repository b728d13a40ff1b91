"""Noise schedule and closed-form forward process.

Steps are 1-based: ``t_d`` runs over 1..T_d and ``alpha_bar(0) = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .._validation import check_scalar
from ..exceptions import ConfigurationError, RejectedInputError


@dataclass(frozen=True)
class DiffusionSchedule:
    beta: np.ndarray            # [T_d], beta[t_d - 1]

    def __post_init__(self):
        b = np.asarray(self.beta, dtype=np.float64)
        if b.ndim != 1 or b.size < 1:
            raise ConfigurationError("beta must be a non-empty 1-D sequence")
        if np.any(b <= 0) or np.any(b >= 1):
            raise ConfigurationError("every beta must lie in (0, 1)")
        object.__setattr__(self, "beta", b)

    @property
    def T_d(self) -> int:
        return self.beta.size

    @property
    def alpha(self) -> np.ndarray:
        return 1.0 - self.beta

    @property
    def alpha_bar(self) -> np.ndarray:
        return np.cumprod(self.alpha)

    def alpha_bar_at(self, t_d):
        """alpha_bar for 1-based steps, with alpha_bar(0) = 1."""
        ab = np.concatenate([[1.0], self.alpha_bar])
        return ab[np.asarray(t_d)]

    def sigma(self, t_d):
        """Posterior standard deviation used by the reverse sampler."""
        t_d = np.asarray(t_d)
        a = self.alpha[t_d - 1]
        return np.sqrt((1.0 - a) * (1.0 - self.alpha_bar_at(t_d - 1)) / (1.0 - self.alpha_bar_at(t_d)))

    def check_step(self, t_d) -> None:
        t = np.asarray(t_d)
        if t.dtype.kind not in "iu" or np.any(t < 1) or np.any(t > self.T_d):
            raise RejectedInputError(f"t_d must be an integer in [1, {self.T_d}]")

    def to_dict(self) -> dict:
        return {"beta": self.beta.tolist()}


def make_schedule(T_d: int, beta_min: float = 1e-4, beta_max: float = 2e-2) -> DiffusionSchedule:
    """Linearly spaced betas from ``beta_min`` to ``beta_max``."""
    check_scalar(T_d, "T_d", min_val=1, integer=True)
    check_scalar(beta_min, "beta_min", min_val=0, include_min=False)
    check_scalar(beta_max, "beta_max", max_val=1, include_max=False)
    if beta_min > beta_max:
        raise ConfigurationError(f"beta_min ({beta_min}) > beta_max ({beta_max})")
    return DiffusionSchedule(np.linspace(beta_min, beta_max, T_d))


def forward_diffuse(s0, t_d, zeta, sched: DiffusionSchedule):
    """sqrt(alpha_bar) * s0 + sqrt(1 - alpha_bar) * zeta.

    Works on numpy arrays or torch tensors; ``t_d`` may be a scalar or one
    step per leading batch item.
    """
    sched.check_step(t_d)
    ab = sched.alpha_bar_at(t_d)
    if np.ndim(ab):
        ab = ab.reshape(-1, *([1] * (np.ndim(s0) - 1)))
    if isinstance(s0, torch.Tensor):
        ab = torch.as_tensor(ab, dtype=s0.dtype, device=s0.device)
        return torch.sqrt(ab) * s0 + torch.sqrt(1.0 - ab) * zeta
    return np.sqrt(ab) * s0 + np.sqrt(1.0 - ab) * zeta


def forward_step(s_prev, t_d, zeta, sched: DiffusionSchedule):
    """One Markov step: sqrt(alpha_t) * s_{t-1} + sqrt(beta_t) * zeta."""
    sched.check_step(t_d)
    b = sched.beta[np.asarray(t_d) - 1]
    return np.sqrt(1.0 - b) * s_prev + np.sqrt(b) * zeta
