"""Exception hierarchy shared by all submodules.

The CLI maps these onto process exit codes (config -> 2, data -> 3,
numerical -> 4).
"""


class TRMStressError(Exception):
    """Base class for package errors."""


class ConfigurationError(TRMStressError, ValueError):
    """Invalid parameters or configuration."""


class RejectedInputError(TRMStressError, ValueError):
    """Input array or value violates an operation's precondition."""


class DegenerateSampleError(RejectedInputError):
    """Stress video is identically zero and cannot be normalized."""


class DatasetIntegrityError(TRMStressError, OSError):
    """Dataset container missing, corrupt or inconsistent with its manifest."""

    def __init__(self, sample_id, message):
        self.sample_id = sample_id
        super().__init__(f"sample {sample_id!r}: {message}")


class SolverError(TRMStressError, RuntimeError):
    """Linear solve failed or the system is singular."""


class TrainingDivergenceError(TRMStressError, RuntimeError):
    """Loss became non-finite during optimization."""


class NotFittedError(TRMStressError, AttributeError):
    """Estimator used before ``fit``."""
