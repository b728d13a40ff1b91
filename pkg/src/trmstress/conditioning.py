"""Condition tensors, stress normalization and the on-disk dataset format.

A condition tensor stacks five [T, H, W] planes along the channel axis:
phase-1 indicator, phase-2 indicator, interface mask (all repeated over
time), the rasterized load profile (0 on the curve, 1 elsewhere) and the
load magnitude (spatially constant per frame).

Dataset layout::

    <root>/manifest.json
    <root>/<sample_id>.npz      float32 arrays, little-endian
    <root>/<sample_id>.json     metadata sidecar
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_video
from .elastodyn import LoadSchedule, StressVideo, frame_times
from .exceptions import (ConfigurationError, DatasetIntegrityError, DegenerateSampleError,
                         RejectedInputError)
from .randfield import InterfaceMask, Microstructure

logger = logging.getLogger(__name__)

CHANNELS = ("p1", "p2", "interface", "profile", "magnitude")
ARRAY_KEYS = ("cond_p1", "cond_p2", "cond_iface", "cond_profile", "cond_magnitude", "s0", "s_max", "s_min")
EXTRA_KEYS = ("phase_map", "load_profile", "load_magnitude", "load_edge_coords")
SPLITS = ("train", "val", "test")


@dataclass
class ConditionTensor:
    channels: np.ndarray            # [5, T, H, W] float32
    dt: float = 1.0                 # s between frames
    grid_spacing: float = 1.0       # mm
    load_units: str = "mm"

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.float32)
        if self.channels.ndim != 4 or self.channels.shape[0] != len(CHANNELS):
            raise RejectedInputError(f"condition must be [5, T, H, W], got {self.channels.shape}")

    @property
    def shape(self):
        """(T, H, W)."""
        return self.channels.shape[1:]

    def __getattr__(self, name):
        if name in CHANNELS:
            return self.channels[CHANNELS.index(name)]
        raise AttributeError(name)


@dataclass
class NormalizedSample:
    s0: np.ndarray
    s_max: float
    s_min: float
    condition: ConditionTensor | None = None

    @property
    def divisor(self) -> float:
        return max(abs(self.s_max), abs(self.s_min))


def rasterize_profile(shape_values: np.ndarray, H: int, W: int) -> np.ndarray:
    """Draw a normalized edge profile as a 1-pixel curve of zeros on a field of ones.

    The plane is a plot of the profile: column ``w`` stands for the edge
    point at fraction (w + 1/2) / W along the loaded edge and the curve
    passes through row round((v + 1) / 2 * (H - 1)) for the value v in
    [-1, 1] there. Neighbouring columns are joined vertically so the
    curve stays connected.
    """
    v = np.clip(np.asarray(shape_values, dtype=float), -1.0, 1.0)
    if v.shape != (W,):
        raise RejectedInputError(f"expected {W} profile values, got {v.shape}")
    rows = np.floor((v + 1.0) / 2.0 * (H - 1) + 0.5).astype(int)
    plane = np.ones((H, W), dtype=np.float32)
    for w in range(W):
        lo = hi = rows[w]
        for nb in (w - 1, w + 1):
            if 0 <= nb < W:
                # extend halfway towards the neighbour, rounding towards this column
                mid = rows[w] + (rows[nb] - rows[w]) // 2 if rows[nb] >= rows[w] else \
                    rows[w] - (rows[w] - rows[nb]) // 2
                lo, hi = min(lo, mid), max(hi, mid)
        plane[lo:hi + 1, w] = 0.0
    return plane


def build_condition(ms: Microstructure, iface: InterfaceMask, load: LoadSchedule, T: int,
                    duration: float | None = None) -> ConditionTensor:
    """Assemble the 5-channel condition for a [T, H, W] stress video."""
    phase = np.asarray(ms.phase_map)
    mask = np.asarray(iface.mask)
    if phase.shape != mask.shape:
        raise RejectedInputError("microstructure and interface mask grids differ")
    if not (isinstance(T, (int, np.integer)) and T >= 1):
        raise RejectedInputError("T must be a positive integer")
    H, W = phase.shape
    duration = load.duration if duration is None else duration
    times = frame_times(duration, T)
    s_cols = (np.arange(W) + 0.5) / W

    p1 = np.broadcast_to(phase.astype(np.float32), (T, H, W))
    p2 = 1.0 - p1
    itf = np.broadcast_to(mask.astype(np.float32), (T, H, W))
    profile = np.empty((T, H, W), dtype=np.float32)
    magnitude = np.empty((T, H, W), dtype=np.float32)
    for k, t in enumerate(times):
        profile[k] = rasterize_profile(load.profile_at(s_cols, t), H, W)
        magnitude[k] = load.magnitude_at(t)
    channels = np.stack([p1, p2, itf, profile, magnitude])
    return ConditionTensor(channels, dt=duration / T, grid_spacing=ms.grid_spacing)


def normalize_stress(s_fem: StressVideo | np.ndarray, condition: ConditionTensor | None = None) -> NormalizedSample:
    """Divide by max(|s_max|, |s_min|) so the result lies in [-1, 1]."""
    values = s_fem.values if isinstance(s_fem, StressVideo) else s_fem
    values = check_video(values, "stress video")
    s_max, s_min = float(values.max()), float(values.min())
    divisor = max(abs(s_max), abs(s_min))
    if divisor == 0.0:
        raise DegenerateSampleError("stress video is identically zero")
    return NormalizedSample(values / divisor, s_max, s_min, condition)


def denormalize_stress(s0_hat, s_max: float, s_min: float, component: str = "sxx",
                       dt: float = 1.0, grid_spacing: float = 1.0) -> StressVideo:
    """Scale a normalized video back to MPa by max(|s_max|, |s_min|)."""
    s0_hat = check_video(s0_hat, "normalized video")
    if not (np.isfinite(s_max) and np.isfinite(s_min)):
        raise RejectedInputError("extrema must be finite")
    if s_max < s_min:
        raise RejectedInputError(f"s_max ({s_max}) < s_min ({s_min})")
    divisor = max(abs(s_max), abs(s_min))
    if divisor == 0.0:
        warnings.warn("s_max = s_min = 0: denormalized video is identically zero", RuntimeWarning,
                      stacklevel=2)
    return StressVideo(component, s0_hat * divisor, dt, grid_spacing)


# --------------------------------------------------------------------------
# Dataset container


@dataclass
class DatasetSample:
    """One stored record: condition, normalized stress, extrema and the load/phase inputs."""

    sample_id: str
    condition: ConditionTensor
    s0: np.ndarray
    s_max: float
    s_min: float
    phase_map: np.ndarray | None = None
    load: LoadSchedule | None = None
    meta: dict = field(default_factory=dict)

    @property
    def divisor(self) -> float:
        return max(abs(self.s_max), abs(self.s_min))

    def s_fem(self) -> np.ndarray:
        return self.s0.astype(np.float64) * self.divisor

    def arrays(self) -> dict:
        c = self.condition.channels
        out = {
            "cond_p1": c[0], "cond_p2": c[1], "cond_iface": c[2], "cond_profile": c[3],
            "cond_magnitude": c[4], "s0": self.s0,
            "s_max": np.array([self.s_max]), "s_min": np.array([self.s_min]),
        }
        if self.phase_map is not None:
            out["phase_map"] = self.phase_map
        if self.load is not None:
            out["load_profile"] = self.load.profile
            out["load_magnitude"] = self.load.magnitude
            out["load_edge_coords"] = self.load.edge_coords
        return {k: np.ascontiguousarray(v, dtype="<f4") for k, v in out.items()}


@dataclass
class DatasetManifest:
    sample_ids: list
    splits: dict                    # sample_id -> "train" | "val" | "test"
    config_hash: str = ""
    files: dict = field(default_factory=dict)       # sample_id -> container file name
    checksums: dict = field(default_factory=dict)   # sample_id -> sha256 of the container
    units: dict = field(default_factory=lambda: {"stress": "MPa", "load": "mm", "time": "s",
                                                 "length": "mm"})
    ratios: tuple = (8, 1, 1)
    seed: int = 0

    def split(self, name: str) -> list:
        if name not in SPLITS:
            raise ConfigurationError(f"unknown split {name!r}")
        return [s for s in self.sample_ids if self.splits.get(s) == name]

    def sizes(self) -> dict:
        return {name: len(self.split(name)) for name in SPLITS}

    def to_json(self) -> str:
        d = dict(sample_ids=list(self.sample_ids), splits=self.splits, config_hash=self.config_hash,
                 files=self.files, checksums=self.checksums, units=self.units,
                 ratios=list(self.ratios), seed=self.seed)
        return json.dumps(d, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        d = json.loads(text)
        d["ratios"] = tuple(d.get("ratios", (8, 1, 1)))
        return cls(**d)


def split_counts(n: int, ratios=(8, 1, 1)) -> tuple[int, int, int]:
    """Train/val/test sizes; val and test rounded half-up, train takes the rest."""
    r = np.asarray(ratios, dtype=float)
    if r.size != 3 or np.any(r < 0) or r.sum() <= 0:
        raise ConfigurationError(f"invalid split ratios {ratios}")
    r = r / r.sum()
    n_val = int(np.floor(n * r[1] + 0.5))
    n_test = int(np.floor(n * r[2] + 0.5))
    n_train = n - n_val - n_test
    return n_train, n_val, n_test


def assign_splits(sample_ids, ratios=(8, 1, 1), seed: int = 0) -> dict:
    """Deterministic split membership for (seed, ids)."""
    ids = list(sample_ids)
    n_train, n_val, _ = split_counts(len(ids), ratios)
    order = np.random.default_rng(seed).permutation(len(ids))
    out = {}
    for rank, i in enumerate(order):
        out[ids[i]] = "train" if rank < n_train else ("val" if rank < n_train + n_val else "test")
    return out


def make_manifest(sample_ids, ratios=(8, 1, 1), seed: int = 0, config_hash: str = "") -> DatasetManifest:
    ids = list(sample_ids)
    return DatasetManifest(ids, assign_splits(ids, ratios, seed), config_hash, ratios=tuple(ratios),
                           seed=seed)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_sample(root, sample: DatasetSample, split: str = "", config_hash: str = "") -> tuple[str, str]:
    """Write one container and its sidecar; returns (file name, checksum)."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    fname = f"{sample.sample_id}.npz"
    tmp = root / (fname + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, **sample.arrays())
    os.replace(tmp, root / fname)
    meta = dict(sample.meta)
    meta.update(sample_id=sample.sample_id, split=split, config_hash=config_hash,
                dt=sample.condition.dt, grid_spacing=sample.condition.grid_spacing,
                units={"stress": "MPa", "load": sample.condition.load_units, "time": "s"})
    if sample.load is not None:
        meta["load_dt"] = sample.load.dt
        meta["load_params"] = sample.load.params
    (root / f"{sample.sample_id}.json").write_text(json.dumps(meta, indent=1, sort_keys=True, default=float))
    return fname, _sha256(root / fname)


def read_sample(root, sample_id: str, checksum: str | None = None, fname: str | None = None) -> DatasetSample:
    root = Path(root)
    path = root / (fname or f"{sample_id}.npz")
    if not path.exists():
        raise DatasetIntegrityError(sample_id, f"container {path.name} is missing")
    if checksum and _sha256(path) != checksum:
        raise DatasetIntegrityError(sample_id, f"checksum mismatch for {path.name}")
    try:
        with np.load(path) as z:
            arrays = {k: z[k] for k in z.files}
    except Exception as exc:  # zipfile / pickle / value errors all mean corruption
        raise DatasetIntegrityError(sample_id, f"unreadable container ({exc})") from exc
    missing = [k for k in ARRAY_KEYS if k not in arrays]
    if missing:
        raise DatasetIntegrityError(sample_id, f"missing arrays {missing}")
    side = root / f"{sample_id}.json"
    meta = json.loads(side.read_text()) if side.exists() else {}
    channels = np.stack([arrays[k] for k in ARRAY_KEYS[:5]])
    cond = ConditionTensor(channels, dt=meta.get("dt", 1.0), grid_spacing=meta.get("grid_spacing", 1.0))
    load = None
    if "load_profile" in arrays and "load_dt" in meta:
        load = LoadSchedule(arrays["load_profile"].astype(float), arrays["load_magnitude"].astype(float),
                            float(meta["load_dt"]), "right", arrays["load_edge_coords"].astype(float),
                            meta.get("load_params", {}))
    return DatasetSample(sample_id, cond, arrays["s0"], float(arrays["s_max"][0]), float(arrays["s_min"][0]),
                         arrays.get("phase_map"), load, meta)


def write_dataset(root, samples, manifest: DatasetManifest) -> DatasetManifest:
    """Write every sample and then the manifest (which records checksums)."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    shapes = {s.condition.shape for s in samples}
    if len(shapes) > 1:
        raise RejectedInputError(f"inconsistent sample shapes {shapes}")
    for s in samples:
        if s.sample_id not in manifest.splits:
            raise RejectedInputError(f"sample {s.sample_id} is not in the manifest")
        fname, digest = write_sample(root, s, manifest.splits[s.sample_id], manifest.config_hash)
        manifest.files[s.sample_id] = fname
        manifest.checksums[s.sample_id] = digest
    write_manifest(root, manifest)
    return manifest


def write_manifest(root, manifest: DatasetManifest) -> None:
    root = Path(root)
    tmp = root / "manifest.json.tmp"
    tmp.write_text(manifest.to_json())
    os.replace(tmp, root / "manifest.json")


def read_manifest(root) -> DatasetManifest:
    path = Path(root) / "manifest.json"
    if not path.exists():
        raise DatasetIntegrityError("manifest", f"no manifest at {path}")
    return DatasetManifest.from_json(path.read_text())


def read_dataset(root, split: str | None = None, verify: bool = True):
    """Load samples (optionally one split) in manifest order; returns (samples, manifest)."""
    manifest = read_manifest(root)
    ids = manifest.sample_ids if split is None else manifest.split(split)
    samples = []
    for sid in ids:
        samples.append(read_sample(root, sid, manifest.checksums.get(sid) if verify else None,
                                   manifest.files.get(sid)))
    return samples, manifest


def stack_split(samples) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(conditions [N, 5, T, H, W], s0 [N, T, H, W], extrema [N, 2] as (s_max, s_min))."""
    if not samples:
        raise ConfigurationError("empty split")
    X = np.stack([s.condition.channels for s in samples]).astype(np.float32)
    y = np.stack([s.s0 for s in samples]).astype(np.float32)
    ext = np.array([[s.s_max, s.s_min] for s in samples], dtype=np.float64)
    return X, y, ext
