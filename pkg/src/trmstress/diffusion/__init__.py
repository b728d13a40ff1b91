"""Conditional diffusion over normalized stress videos."""

from .model import STSDiffusion, denoising_loss, sample, train_step
from .schedule import DiffusionSchedule, forward_diffuse, forward_step, make_schedule
from .stunet import POSITIONS, STUNet, STUNetConfig, count_parameters

__all__ = [
    "DiffusionSchedule", "POSITIONS", "STSDiffusion", "STUNet", "STUNetConfig", "count_parameters",
    "denoising_loss", "forward_diffuse", "forward_step", "make_schedule", "sample", "train_step",
]
