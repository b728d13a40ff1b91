"""Per-instance physics-informed super-resolution of a stress video."""

from __future__ import annotations

import copy
import logging
import math
import time

import numpy as np
import torch
from sklearn.base import BaseEstimator

from .._validation import check_is_fitted, check_scalar, check_video
from ..elastodyn import (DisplacementVideo, LoadSchedule, MaterialField, StressVideo, frame_times)
from ..exceptions import RejectedInputError, TrainingDivergenceError
from .losses import (LOSS_KEYS, BoundarySpec, LossWeights, MaterialLookup, ObservationSet,
                     loss_components, total_loss)
from .networks import FieldNetworks
from .scales import TIME_UNIT, NondimensionalScales, compute_scales

logger = logging.getLogger(__name__)

_DTYPES = {"float32": torch.float32, "float64": torch.float64}


def video_observations(videos: dict, scales: NondimensionalScales, grid_spacing: float,
                       duration: float, source: str = "oracle") -> ObservationSet:
    """Flatten [T, H, W] stress videos (MPa) into dimensionless observations.

    Pixel centres map to (x_bar, y_bar); frame k sits at (k + 1) * duration / T,
    expressed in microseconds.
    """
    names = tuple(videos)
    arrays = [check_video(videos[n], n) for n in names]
    T, H, W = arrays[0].shape
    if any(a.shape != (T, H, W) for a in arrays):
        raise RejectedInputError("observed videos must share one shape")
    t = frame_times(duration, T) / TIME_UNIT
    y = (np.arange(H) + 0.5) * grid_spacing / scales.L
    x = (np.arange(W) + 0.5) * grid_spacing / scales.L
    tt, yy, xx = np.meshgrid(t, y, x, indexing="ij")
    coords = np.stack([xx.ravel(), yy.ravel(), tt.ravel()], 1)
    values = np.stack([a.ravel() for a in arrays], 1) / scales.sigma_c
    return ObservationSet(coords, values, names, source)


def output_shape(shape, factors) -> tuple[int, int, int]:
    """ceil(f_t T) x ceil(f_h H) x ceil(f_w W), tolerant to float round-off."""
    if len(factors) != 3:
        raise RejectedInputError("factors must be (f_t, f_h, f_w)")
    out = []
    for n, f in zip(shape, factors):
        check_scalar(f, "factor", min_val=0, include_min=False, error=RejectedInputError)
        out.append(int(math.ceil(n * f - 1e-9)))
    return tuple(out)


class STSRPINN(BaseEstimator):
    """Unsupervised spatiotemporal super-resolution of one stress video.

    Five coordinate networks are fitted to observed stress plus the
    boundary, momentum-balance and constitutive residuals of plane-strain
    elastodynamics, then queried on any space-time grid.

    Parameters
    ----------
    omega_op, omega_pi : float
        Weights of the observation term and of the physics terms.
    epochs : int
        Optimizer steps; collocation and boundary points are redrawn every
        epoch and a fresh observation minibatch is taken.
    obs_batch_size : int or None
        Observations per epoch (None = all of them).
    """

    def __init__(self, u_layers=12, s_layers=16, width=64, omega_op=1.0, omega_pi=5.0,
                 epochs=1000, learning_rate=1e-3, lr_decay=None, n_collocation=4096,
                 n_boundary=512, obs_batch_size=8192, observed=("sxx",), dtype="float32",
                 u_c=None, random_state=0, log_every=100):
        self.u_layers = u_layers
        self.s_layers = s_layers
        self.width = width
        self.omega_op = omega_op
        self.omega_pi = omega_pi
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.n_collocation = n_collocation
        self.n_boundary = n_boundary
        self.obs_batch_size = obs_batch_size
        self.observed = observed
        self.dtype = dtype
        self.u_c = u_c
        self.random_state = random_state
        self.log_every = log_every

    # ------------------------------------------------------------------
    def _tensor(self, a):
        return torch.as_tensor(np.asarray(a), dtype=_DTYPES[self.dtype])

    def fit(self, videos, material: MaterialField, load: LoadSchedule | None,
            duration: float | None = None):
        """Fit to observed stress.

        Parameters
        ----------
        videos : dict or ndarray
            ``{"sxx": [T, H, W]}`` in MPa (an ndarray is taken as s_xx). Only
            the components listed in ``observed`` enter the data term.
        material : MaterialField
            Pixel-wise material on the observation grid.
        load : LoadSchedule
            Right-edge displacement history.
        duration : float, optional
            Time window in seconds, defaults to ``load.duration``.
        """
        if not isinstance(videos, dict):
            videos = {"sxx": videos}
        missing = [c for c in self.observed if c not in videos]
        if missing:
            raise RejectedInputError(f"observed components missing from input: {missing}")
        weights = LossWeights(self.omega_op, self.omega_pi)
        duration = float(duration if duration is not None else load.duration)
        torch.manual_seed(self.random_state)
        rng = np.random.default_rng(self.random_state)

        first = check_video(videos[self.observed[0]], self.observed[0])
        T, H, W = first.shape
        if material.shape != (H, W):
            raise RejectedInputError(f"material grid {material.shape} does not match video {first.shape}")
        scales = compute_scales(material, material.length, load, self.u_c)
        obs = video_observations({c: videos[c] for c in self.observed}, scales,
                                 material.grid_spacing, duration)
        t_end = duration / TIME_UNIT
        extent = (material.grid_spacing * W / scales.L, material.grid_spacing * H / scales.L)
        boundary = BoundarySpec(load, scales, extent, t_end)
        lookup = MaterialLookup(material, scales, _DTYPES[self.dtype])

        nets = FieldNetworks(self.u_layers, self.s_layers, self.width, t_end).to(_DTYPES[self.dtype])
        opt = torch.optim.Adam(nets.parameters(), lr=self.learning_rate)
        sched = None
        if self.lr_decay:
            sched = torch.optim.lr_scheduler.LambdaLR(
                opt, lambda e: self.lr_decay ** (e / max(1, self.epochs)))

        obs_c = self._tensor(obs.coords)
        obs_v = self._tensor(obs.values)
        n_obs = len(obs)
        batch = n_obs if not self.obs_batch_size else min(self.obs_batch_size, n_obs)
        history = {k: [] for k in (*LOSS_KEYS, "total")}
        last_good = copy.deepcopy(nets.state_dict())
        t0 = time.perf_counter()
        for epoch in range(self.epochs):
            idx = torch.as_tensor(rng.choice(n_obs, batch, replace=False)) if batch < n_obs else slice(None)
            col = np.stack([rng.uniform(0, extent[0], self.n_collocation),
                            rng.uniform(0, extent[1], self.n_collocation),
                            rng.uniform(0, t_end, self.n_collocation)], 1)
            bnd = {k: (self._tensor(p), self._tensor(v))
                   for k, (p, v) in boundary.sample(self.n_boundary, rng).items()}
            comps = loss_components(nets, scales, lookup, (obs_c[idx], obs_v[idx]), bnd,
                                    self._tensor(col), self.observed)
            loss = total_loss(comps, weights)
            if not torch.isfinite(loss):
                nets.load_state_dict(last_good)
                self.nets_ = nets
                raise TrainingDivergenceError(
                    f"non-finite SRPINN loss at epoch {epoch}; networks reset to last finite state")
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            if sched is not None:
                sched.step()
            for k in LOSS_KEYS:
                history[k].append(float(comps[k].detach()))
            history["total"].append(float(loss.detach()))
            if self.log_every and (epoch % self.log_every == 0 or epoch == self.epochs - 1):
                last_good = copy.deepcopy(nets.state_dict())
                logger.info("srpinn epoch %d  total %.4e  obs %.3e  bnd %.3e  bal %.3e  con %.3e  (%.0fs)",
                            epoch, history["total"][-1], *(history[k][-1] for k in LOSS_KEYS),
                            time.perf_counter() - t0)

        self.nets_ = nets.eval()
        self.scales_ = scales
        self.shape_ = (T, H, W)
        self.duration_ = duration
        self.grid_spacing_ = material.grid_spacing
        self.extent_ = extent
        self.history_ = history
        self.material_ = material
        self.load_ = load
        self.fit_seconds_ = time.perf_counter() - t0
        return self

    # ------------------------------------------------------------------
    def predict_fields(self, coords, batch_size: int = 65536) -> dict[str, np.ndarray]:
        """Dimensional fields at physical points ``coords`` [N, 3] = (x mm, y mm, t s).

        Returns ux, uy in mm and sxx, syy, sxy in MPa.
        """
        check_is_fitted(self, "nets_")
        coords = np.asarray(coords, dtype=float)
        s = self.scales_
        nd = np.stack([coords[:, 0] / s.L, coords[:, 1] / s.L, coords[:, 2] / TIME_UNIT], 1)
        out = {k: np.empty(len(nd)) for k in ("ux", "uy", "sxx", "syy", "sxy")}
        with torch.no_grad():
            for i in range(0, len(nd), batch_size):
                vals = self.nets_(self._tensor(nd[i:i + batch_size]))
                for k, v in vals.items():
                    out[k][i:i + batch_size] = v.double().numpy()
        for k in ("ux", "uy"):
            out[k] *= s.u_c
        for k in ("sxx", "syy", "sxy"):
            out[k] *= s.sigma_c
        return out

    def grid_coordinates(self, shape):
        """Physical pixel-centre/frame coordinates of a [T, H, W] grid over the fitted domain."""
        T, H, W = shape
        _, H0, W0 = self.shape_
        Lx, Ly = self.grid_spacing_ * W0, self.grid_spacing_ * H0
        t = frame_times(self.duration_, T)
        y = (np.arange(H) + 0.5) * Ly / H
        x = (np.arange(W) + 0.5) * Lx / W
        return t, y, x

    def super_resolve(self, factors=(1.0, 1.0, 1.0), components=("ux", "uy", "sxx", "syy", "sxy")) -> dict:
        """Evaluate the fitted fields on a grid magnified by (f_t, f_h, f_w).

        The new grid spans the same domain and time window, with
        ceil(f * n) points per axis; factors need not be integers.
        """
        check_is_fitted(self, "nets_")
        shape = output_shape(self.shape_, factors)
        T, H, W = shape
        t, y, x = self.grid_coordinates(shape)
        frame_dt = self.duration_ / T
        spacing = self.grid_spacing_ * self.shape_[2] / W
        out = {}
        yy, xx = np.meshgrid(y, x, indexing="ij")
        frames = {k: np.empty(shape) for k in components}
        for i, tk in enumerate(t):
            pts = np.stack([xx.ravel(), yy.ravel(), np.full(xx.size, tk)], 1)
            vals = self.predict_fields(pts)
            for k in components:
                frames[k][i] = vals[k].reshape(H, W)
        for k in components:
            cls = StressVideo if k.startswith("s") else DisplacementVideo
            out[k] = cls(k, frames[k], frame_dt, spacing)
        return out

    def loss_history(self) -> dict:
        check_is_fitted(self, "history_")
        return {k: np.asarray(v) for k, v in self.history_.items()}
