"""Physics-informed spatiotemporal super-resolution of stress videos."""

from .estimator import STSRPINN, output_shape, video_observations
from .losses import (BoundarySpec, LossWeights, MaterialLookup, ObservationSet, loss_components,
                     total_loss)
from .networks import FieldEvaluation, FieldMLP, FieldNetworks, evaluate_fields
from .scales import TIME_UNIT, NondimensionalScales, compute_scales

__all__ = [
    "STSRPINN", "output_shape", "video_observations", "BoundarySpec", "LossWeights",
    "MaterialLookup", "ObservationSet", "loss_components", "total_loss", "FieldEvaluation",
    "FieldMLP", "FieldNetworks", "evaluate_fields", "TIME_UNIT", "NondimensionalScales",
    "compute_scales",
]
