"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

import numbers

import numpy as np

from .exceptions import ConfigurationError, NotFittedError, RejectedInputError


def check_finite_array(a, name: str = "array", ndim: int | None = None, dtype=np.float64) -> np.ndarray:
    """Convert ``a`` to an ndarray and reject NaN/inf or a wrong rank."""
    arr = np.asarray(a, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise RejectedInputError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise RejectedInputError(f"{name} contains non-finite values")
    return arr


def check_scalar(x, name: str, *, min_val=None, max_val=None, include_min=True, include_max=True,
                 integer=False, error=ConfigurationError):
    if integer:
        if isinstance(x, bool) or not isinstance(x, numbers.Integral):
            raise error(f"{name} must be an integer, got {x!r}")
    elif isinstance(x, bool) or not isinstance(x, numbers.Real):
        raise error(f"{name} must be a real number, got {x!r}")
    if not np.isfinite(x):
        raise error(f"{name} must be finite, got {x!r}")
    if min_val is not None and (x < min_val or (not include_min and x == min_val)):
        op = ">=" if include_min else ">"
        raise error(f"{name} must be {op} {min_val}, got {x!r}")
    if max_val is not None and (x > max_val or (not include_max and x == max_val)):
        op = "<=" if include_max else "<"
        raise error(f"{name} must be {op} {max_val}, got {x!r}")
    return x


def check_video(v, name: str = "video") -> np.ndarray:
    """A [T, H, W] finite float array with every extent >= 1."""
    arr = check_finite_array(v, name, ndim=3)
    if min(arr.shape) < 1:
        raise RejectedInputError(f"{name} has an empty axis: {arr.shape}")
    return arr


def check_condition_batch(X, n_channels: int = 5) -> np.ndarray:
    """Accept [C, T, H, W] or [N, C, T, H, W]; always return the batched form."""
    arr = check_finite_array(X, "condition", dtype=np.float32)
    if arr.ndim == 4:
        arr = arr[None]
    if arr.ndim != 5 or arr.shape[1] != n_channels:
        raise RejectedInputError(
            f"condition must have shape [N, {n_channels}, T, H, W], got {arr.shape}")
    return arr


def check_is_fitted(estimator, attributes) -> None:
    if isinstance(attributes, str):
        attributes = [attributes]
    if not all(getattr(estimator, a, None) is not None for a in attributes):
        raise NotFittedError(
            f"This {type(estimator).__name__} instance is not fitted yet; call 'fit' first.")


def check_random_state(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
