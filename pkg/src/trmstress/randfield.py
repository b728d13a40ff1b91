"""Gaussian random fields by the stochastic harmonic function (SHF) and
two-phase microstructures obtained by thresholding them.

The field is a finite double sum of cosines

    Y(x1, x2) = sum_ij A_ij [cos(w1_i x1 + w2_j x2 + p_ij) + cos(-w1_i x1 + w2_j x2 + q_ij)]

with one random frequency per cell of a rectangular tiling of the truncated
wavenumber domain, and amplitudes A_ij = sqrt(4 S(w1_i, w2_j) dw1_i dw2_j)
taken from the squared-exponential spectral density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ._validation import check_finite_array, check_scalar
from .exceptions import ConfigurationError, RejectedInputError

__all__ = [
    "SpectralConfig",
    "GaussianFieldSample",
    "Microstructure",
    "InterfaceMask",
    "autocorrelation",
    "spectral_density",
    "sample_shf_field",
    "threshold_microstructure",
    "extract_interface",
    "empirical_autocorrelation",
    "generate_microstructure",
    "save_microstructure_png",
]


@dataclass(frozen=True)
class SpectralConfig:
    """Parameters of the SHF representation.

    Correlation lengths are in mm, wavenumbers in rad/mm. When the
    wavenumber bounds are left as ``None`` the domain is truncated
    symmetrically at ``6 / c`` per axis.
    """

    c1: float = 0.25
    c2: float = 0.25
    n1: int = 32
    n2: int = 32
    omega1_lower: float | None = None
    omega1_upper: float | None = None
    omega2_lower: float | None = None
    omega2_upper: float | None = None
    rng_seed: int = 0

    def __post_init__(self):
        check_scalar(self.c1, "c1", min_val=0, include_min=False)
        check_scalar(self.c2, "c2", min_val=0, include_min=False)
        check_scalar(self.n1, "n1", min_val=1, integer=True)
        check_scalar(self.n2, "n2", min_val=1, integer=True)
        for name, c in (("omega1", self.c1), ("omega2", self.c2)):
            lo, hi = getattr(self, f"{name}_lower"), getattr(self, f"{name}_upper")
            if hi is None:
                hi = 6.0 / c
            if lo is None:
                lo = -hi
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
                raise ConfigurationError(f"{name} bounds must satisfy lower < upper, got [{lo}, {hi}]")
            object.__setattr__(self, f"{name}_lower", float(lo))
            object.__setattr__(self, f"{name}_upper", float(hi))

    def partition(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell edges of the uniform n1 x n2 tiling of the wavenumber domain."""
        e1 = np.linspace(self.omega1_lower, self.omega1_upper, self.n1 + 1)
        e2 = np.linspace(self.omega2_lower, self.omega2_upper, self.n2 + 1)
        return e1, e2

    def with_seed(self, seed: int) -> "SpectralConfig":
        return SpectralConfig(self.c1, self.c2, self.n1, self.n2, self.omega1_lower,
                              self.omega1_upper, self.omega2_lower, self.omega2_upper, int(seed))


@dataclass
class GaussianFieldSample:
    values: np.ndarray
    grid_spacing: float
    config: SpectralConfig
    amplitudes: np.ndarray = field(repr=False, default=None)

    @property
    def shape(self):
        return self.values.shape


@dataclass
class Microstructure:
    """Binary phase map, 1 = phase-1 and 0 = phase-2."""

    phase_map: np.ndarray
    volume_fraction_p1: float
    grid_spacing: float

    @property
    def shape(self):
        return self.phase_map.shape


@dataclass
class InterfaceMask:
    mask: np.ndarray


def autocorrelation(delta1, delta2, cfg: SpectralConfig):
    """Squared-exponential autocorrelation exp(-(d1/c1)^2 - (d2/c2)^2)."""
    d1 = np.asarray(delta1, dtype=float)
    d2 = np.asarray(delta2, dtype=float)
    if not (np.all(np.isfinite(d1)) and np.all(np.isfinite(d2))):
        raise RejectedInputError("lags must be finite")
    out = np.exp(-(d1 / cfg.c1) ** 2 - (d2 / cfg.c2) ** 2)
    return float(out) if out.ndim == 0 else out


def spectral_density(omega1, omega2, cfg: SpectralConfig):
    """Power spectral density paired with :func:`autocorrelation`."""
    w1 = np.asarray(omega1, dtype=float)
    w2 = np.asarray(omega2, dtype=float)
    if not (np.all(np.isfinite(w1)) and np.all(np.isfinite(w2))):
        raise RejectedInputError("wavenumbers must be finite")
    out = cfg.c1 * cfg.c2 / (4.0 * math.pi) * np.exp(-(cfg.c1 * w1 / 2.0) ** 2 - (cfg.c2 * w2 / 2.0) ** 2)
    return float(out) if out.ndim == 0 else out


def pixel_centers(n: int, grid_spacing: float) -> np.ndarray:
    return (np.arange(n) + 0.5) * grid_spacing


def sample_shf_field(cfg: SpectralConfig, H: int = 64, W: int = 64,
                     grid_spacing: float = 2.0 / 64) -> GaussianFieldSample:
    """Draw one realization of the SHF field on an H x W pixel-centre grid.

    Axis 0 (rows) carries ``x2``, axis 1 (columns) carries ``x1``. The
    result depends only on ``cfg`` (including ``cfg.rng_seed``).
    """
    check_scalar(H, "H", min_val=2, integer=True)
    check_scalar(W, "W", min_val=2, integer=True)
    check_scalar(grid_spacing, "grid_spacing", min_val=0, include_min=False)
    e1, e2 = cfg.partition()
    d1, d2 = np.diff(e1), np.diff(e2)
    if np.any(d1 <= 0) or np.any(d2 <= 0):
        raise ConfigurationError("degenerate wavenumber sub-interval")

    rng = np.random.default_rng(cfg.rng_seed)
    w1 = rng.uniform(e1[:-1], e1[1:])
    w2 = rng.uniform(e2[:-1], e2[1:])
    # (0, 2pi]
    phi1 = 2.0 * np.pi - rng.uniform(0.0, 2.0 * np.pi, size=(cfg.n1, cfg.n2))
    phi2 = 2.0 * np.pi - rng.uniform(0.0, 2.0 * np.pi, size=(cfg.n1, cfg.n2))

    amp = np.sqrt(4.0 * spectral_density(w1[:, None], w2[None, :], cfg) * d1[:, None] * d2[None, :])

    x1 = pixel_centers(W, grid_spacing)
    x2 = pixel_centers(H, grid_spacing)
    # cos(a + b + p) = Re(e^{ia} e^{ib} e^{ip}); separable in x1 and x2
    e_x1 = np.exp(1j * np.outer(w1, x1))            # [n1, W]
    e_x2 = np.exp(1j * np.outer(w2, x2))            # [n2, H]
    c_plus = amp * np.exp(1j * phi1)                # [n1, n2]
    c_minus = amp * np.exp(1j * phi2)
    plus = np.einsum("ij,jh,iw->hw", c_plus, e_x2, e_x1)
    minus = np.einsum("ij,jh,iw->hw", c_minus, e_x2, np.conj(e_x1))
    values = (plus + minus).real
    return GaussianFieldSample(values=values, grid_spacing=float(grid_spacing), config=cfg,
                               amplitudes=amp)


def _phase1_count(volume_fraction: float, n: int) -> int:
    # round half up, not banker's rounding
    return int(math.floor(volume_fraction * n + 0.5))


def threshold_microstructure(fld: GaussianFieldSample | np.ndarray,
                             volume_fraction_p1: float = 0.5,
                             grid_spacing: float | None = None) -> Microstructure:
    """Assign phase-1 to the lowest-valued pixels so the fraction is exact.

    Ties are broken by row-major pixel index (stable sort), which also makes
    the map monotone in ``volume_fraction_p1``.
    """
    if not (isinstance(volume_fraction_p1, (int, float)) and 0.0 < volume_fraction_p1 < 1.0):
        raise RejectedInputError(f"volume_fraction_p1 must lie in (0, 1), got {volume_fraction_p1!r}")
    if isinstance(fld, GaussianFieldSample):
        values, spacing = fld.values, fld.grid_spacing
    else:
        values, spacing = fld, grid_spacing
    values = check_finite_array(values, "field", ndim=2)
    if spacing is None:
        spacing = 2.0 / values.shape[1]
    k = _phase1_count(volume_fraction_p1, values.size)
    order = np.argsort(values.ravel(), kind="stable")
    flat = np.zeros(values.size, dtype=np.uint8)
    flat[order[:k]] = 1
    return Microstructure(flat.reshape(values.shape), float(volume_fraction_p1), float(spacing))


def extract_interface(ms: Microstructure | np.ndarray, width: int = 1) -> InterfaceMask:
    """Mark pixels within ``width`` 4-neighbour steps of the other phase.

    ``width=1`` is plain 4-neighbourhood adjacency, marked on both sides of
    the boundary.
    """
    phase = ms.phase_map if isinstance(ms, Microstructure) else np.asarray(ms)
    check_scalar(width, "width", min_val=1, integer=True, error=RejectedInputError)
    phase = phase.astype(bool)
    if phase.all() or not phase.any():
        return InterfaceMask(np.zeros(phase.shape, dtype=bool))
    if width == 1:
        mask = np.zeros(phase.shape, dtype=bool)
        diff_v = phase[1:, :] != phase[:-1, :]
        diff_h = phase[:, 1:] != phase[:, :-1]
        mask[1:, :] |= diff_v
        mask[:-1, :] |= diff_v
        mask[:, 1:] |= diff_h
        mask[:, :-1] |= diff_h
        return InterfaceMask(mask)
    # taxicab distance to the nearest pixel of the opposite phase
    d_in = ndimage.distance_transform_cdt(phase, metric="taxicab")
    d_out = ndimage.distance_transform_cdt(~phase, metric="taxicab")
    dist = np.where(phase, d_in, d_out)
    return InterfaceMask(dist <= width)


def generate_microstructure(cfg: SpectralConfig, volume_fraction_p1: float = 0.5,
                            H: int = 64, W: int = 64, length: float = 2.0,
                            interface_width: int = 1) -> tuple[Microstructure, InterfaceMask]:
    """Field -> threshold -> interface in one call."""
    fld = sample_shf_field(cfg, H, W, grid_spacing=length / W)
    ms = threshold_microstructure(fld, volume_fraction_p1)
    return ms, extract_interface(ms, interface_width)


def empirical_autocorrelation(fields, max_lag: int) -> np.ndarray:
    """Normalized two-point autocorrelation averaged over realizations.

    ``fields`` is [N, H, W] of zero-mean fields. Returns an array of shape
    (2*max_lag+1, 2*max_lag+1) indexed by (lag_rows + max_lag, lag_cols + max_lag),
    normalized by the zero-lag value.
    """
    f = np.asarray(fields, dtype=float)
    if f.ndim == 2:
        f = f[None]
    _, H, W = f.shape
    if max_lag >= min(H, W):
        raise RejectedInputError("max_lag must be smaller than the field size")
    out = np.empty((2 * max_lag + 1, 2 * max_lag + 1))
    for a in range(-max_lag, max_lag + 1):
        for b in range(-max_lag, max_lag + 1):
            r0, r1 = max(0, -a), H - max(0, a)
            c0, c1 = max(0, -b), W - max(0, b)
            prod = f[:, r0:r1, c0:c1] * f[:, r0 + a:r1 + a, c0 + b:c1 + b]
            out[a + max_lag, b + max_lag] = prod.mean()
    return out / out[max_lag, max_lag]


def save_microstructure_png(ms: Microstructure, path) -> None:
    """8-bit grayscale export: 255 = phase-1, 0 = phase-2."""
    from PIL import Image

    img = (ms.phase_map.astype(np.uint8) * 255)
    Image.fromarray(img).save(path)
