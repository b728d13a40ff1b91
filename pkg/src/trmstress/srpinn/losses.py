"""Observation, boundary, momentum-balance and constitutive loss terms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..elastodyn import LoadSchedule, MaterialField
from ..exceptions import ConfigurationError, RejectedInputError
from .networks import FieldNetworks, evaluate_fields
from .scales import TIME_UNIT, NondimensionalScales

LOSS_KEYS = ("observation", "boundary", "balanced", "constitutive")


@dataclass(frozen=True)
class LossWeights:
    omega_op: float = 1.0
    omega_pi: float = 5.0

    def __post_init__(self):
        if self.omega_op < 0 or self.omega_pi < 0:
            raise RejectedInputError("loss weights must be non-negative")
        if self.omega_op == 0 and self.omega_pi == 0:
            raise RejectedInputError("loss weights cannot both be zero")


@dataclass
class ObservationSet:
    """Observed stress at space-time points.

    ``coords`` is [N, 3] holding (x_bar, y_bar, t) with t in microseconds;
    ``values`` is [N] (or [N, k] for several components) already divided by
    sigma_c. ``components`` names the columns.
    """

    coords: np.ndarray
    values: np.ndarray
    components: tuple = ("sxx",)
    source: str = "oracle"

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.coords.ndim != 2 or self.coords.shape[1] != 3:
            raise RejectedInputError("observation coords must be [N, 3]")
        if self.values.shape != (self.coords.shape[0], len(self.components)):
            raise RejectedInputError("observation values do not match coords/components")
        if not (np.all(np.isfinite(self.coords)) and np.all(np.isfinite(self.values))):
            raise RejectedInputError("observations must be finite")

    def __len__(self):
        return self.coords.shape[0]


class MaterialLookup:
    """Nearest-pixel lookup of (rho_bar, lambda_bar, mu_bar) at x_bar, y_bar."""

    def __init__(self, material: MaterialField, scales: NondimensionalScales, dtype=torch.float32):
        rho, lam, mu = scales.nondim_material(material)
        self.H, self.W = material.shape
        self.extent_x = material.grid_spacing * self.W / scales.L
        self.extent_y = material.grid_spacing * self.H / scales.L
        self.table = torch.tensor(np.stack([rho, lam, mu], axis=-1).reshape(-1, 3), dtype=dtype)

    def __call__(self, xy: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        w = torch.clamp((xy[:, 0] / self.extent_x * self.W).long(), 0, self.W - 1)
        h = torch.clamp((xy[:, 1] / self.extent_y * self.H).long(), 0, self.H - 1)
        m = self.table[h * self.W + w]
        return m[:, 0], m[:, 1], m[:, 2]


class BoundarySpec:
    """Sampler for the three displacement-constrained edges.

    u_x = 0 on the left edge, u_y = 0 on the bottom edge and u_x equal to
    the load schedule on the right edge, all divided by u_c.
    """

    def __init__(self, load: LoadSchedule | None, scales: NondimensionalScales,
                 extent: tuple[float, float] = (1.0, 1.0), t_end: float | None = None):
        self.load = load
        self.scales = scales
        self.extent = extent
        if t_end is None:
            if load is None:
                raise ConfigurationError("t_end is required without a load schedule")
            t_end = load.duration / TIME_UNIT
        self.t_end = float(t_end)

    def right_values(self, y_bar: np.ndarray, t: np.ndarray) -> np.ndarray:
        if self.load is None:
            return np.zeros_like(y_bar)
        s = y_bar / self.extent[1]
        return self.load.displacement(s, t * TIME_UNIT) / self.scales.u_c

    def sample(self, n_per_edge: int, rng: np.random.Generator):
        """Return dict edge -> (coords [n, 3], target [n])."""
        ex, ey = self.extent
        out = {}
        for edge in ("left", "right", "bottom"):
            t = rng.uniform(0.0, self.t_end, n_per_edge)
            if edge == "bottom":
                x = rng.uniform(0.0, ex, n_per_edge)
                pts = np.stack([x, np.zeros_like(x), t], 1)
                target = np.zeros(n_per_edge)
            else:
                y = rng.uniform(0.0, ey, n_per_edge)
                xv = np.zeros_like(y) if edge == "left" else np.full_like(y, ex)
                pts = np.stack([xv, y, t], 1)
                target = np.zeros(n_per_edge) if edge == "left" else self.right_values(y, t)
            out[edge] = (pts, target)
        return out


def _mse(r: torch.Tensor) -> torch.Tensor:
    return torch.mean(r * r)


def loss_components(nets: FieldNetworks, scales: NondimensionalScales, material: MaterialLookup,
                    observations: tuple[torch.Tensor, torch.Tensor] | None,
                    boundary: dict | None, collocation: torch.Tensor | None,
                    observed: tuple = ("sxx",)) -> dict[str, torch.Tensor]:
    """The four dimensionless loss terms as scalar tensors.

    ``observations`` is (coords [N, 3], values [N, k]); ``boundary`` is the
    dict returned by :meth:`BoundarySpec.sample` converted to tensors;
    ``collocation`` is [M, 3].
    """
    ref = next(nets.parameters())
    zero = torch.zeros((), dtype=ref.dtype)
    out = {}

    if observations is None or observations[0].shape[0] == 0:
        raise ConfigurationError("observation set is empty")
    oc, ov = observations
    pred = [nets.nets[name](oc) for name in observed]
    out["observation"] = sum(_mse(p - ov[:, i]) for i, p in enumerate(pred)) if pred else zero

    if boundary:
        lb = zero
        for edge, comp in (("left", "ux"), ("right", "ux"), ("bottom", "uy")):
            pts, target = boundary[edge]
            lb = lb + _mse(nets.nets[comp](pts) - target)
        out["boundary"] = lb
    else:
        out["boundary"] = zero

    if collocation is not None and collocation.shape[0] > 0:
        ev = evaluate_fields(collocation, nets)
        g, v = ev.grads, ev.values
        rho, lam, mu = material(collocation)
        f = scales.inertia_factor
        k = scales.kappa
        rx = f * (g["dsxx_dx"] + g["dsxy_dy"]) - rho * g["d2ux_dt2"]
        ry = f * (g["dsxy_dx"] + g["dsyy_dy"]) - rho * g["d2uy_dt2"]
        out["balanced"] = _mse(rx) + _mse(ry)
        exx, eyy, exy = ev.strain()
        c11 = k * lam + 2.0 * mu
        r1 = v["sxx"] - c11 * exx - k * lam * eyy
        r2 = v["syy"] - c11 * eyy - k * lam * exx
        r3 = v["sxy"] - 2.0 * mu * exy
        out["constitutive"] = _mse(r1) + _mse(r2) + _mse(r3)
    else:
        out["balanced"] = zero
        out["constitutive"] = zero
    return out


def total_loss(components: dict, weights: LossWeights):
    """omega_op * L_obs + omega_pi * (L_boundary + L_balanced + L_constitutive)."""
    for key in LOSS_KEYS:
        if float(torch.as_tensor(components[key]).detach()) < 0:
            raise RejectedInputError(f"loss component {key} is negative")
    physics = components["boundary"] + components["balanced"] + components["constitutive"]
    return weights.omega_op * components["observation"] + weights.omega_pi * physics
