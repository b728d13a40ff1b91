"""Config-driven building blocks shared by the CLI and the acceptance tests."""

from __future__ import annotations

import logging
import time
from pathlib import Path

import numpy as np

from .auxnet import ExtremaRegressor
from .conditioning import (DatasetManifest, DatasetSample, build_condition, make_manifest, normalize_stress, read_manifest,
                           read_sample, stack_split, write_manifest, write_sample)
from .config import data_hash
from .diffusion import STSDiffusion
from .elastodyn import LoadFamily, MaterialField, build_load_schedule, solve_elastodynamics
from .exceptions import ConfigurationError, DatasetIntegrityError
from .randfield import SpectralConfig, generate_microstructure
from .metrics import aggregate, error_report, rme
from .srpinn import STSRPINN, output_shape

logger = logging.getLogger(__name__)


def sample_seeds(seed: int, index: int) -> tuple[int, int]:
    """(microstructure seed, load seed) for sample ``index``; independent of the dataset size."""
    a, b = np.random.SeedSequence([int(seed), int(index)]).generate_state(2)
    return int(a), int(b)


def sample_id(index: int) -> str:
    return f"s{index:05d}"


def load_family(cfg: dict) -> LoadFamily:
    c = cfg["load"]
    return LoadFamily(tuple(c["amplitude_range"]), tuple(c["frequency_range"]), tuple(c["span_range"]),
                      tuple(c["center_range"]), float(c["duration"]), int(c["n_steps"]), int(c["n_edge"]))


def build_inputs(cfg: dict, index: int):
    """Microstructure, interface, material and load for one sample."""
    ms_seed, load_seed = sample_seeds(cfg["seed"], index)
    s = cfg["spectral"]
    m = cfg["microstructure"]
    g = cfg["grid"]
    spec = SpectralConfig(c1=s["c1"], c2=s["c2"], n1=s["n1"], n2=s["n2"], rng_seed=ms_seed)
    ms, iface = generate_microstructure(spec, m["volume_fraction"], g["H"], g["W"], m["length"],
                                        m["interface_width"])
    mat = cfg["material"]
    material = MaterialField.from_phase_map(ms.phase_map, ms.grid_spacing, mat["phase1"], mat["phase2"])
    load = build_load_schedule(load_family(cfg), load_seed)
    return ms, iface, material, load


def make_sample(cfg: dict, index: int, components=("sxx",)):
    """FEM-solve sample ``index`` and package it; returns (DatasetSample, ElastodynamicSolution)."""
    ms, iface, material, load = build_inputs(cfg, index)
    T = cfg["grid"]["T"]
    sol = solve_elastodynamics(material, load, T, cfl=cfg["fem"]["cfl"])
    cond = build_condition(ms, iface, load, T)
    norm = normalize_stress(sol.stress[components[0]], cond)
    sample = DatasetSample(sample_id(index), cond, norm.s0.astype(np.float32), norm.s_max, norm.s_min,
                           ms.phase_map.astype(np.float32), load,
                           {"index": index, "component": components[0]})
    return sample, sol


def generate_dataset(cfg: dict, root, progress=None) -> DatasetManifest:
    """Write the configured dataset under ``root``, skipping samples already on disk.

    A partially written dataset is resumed only if it was produced by the
    same data-relevant configuration.
    """
    root = Path(root)
    n = cfg["dataset"]["n_samples"]
    h = data_hash(cfg)
    ids = [sample_id(i) for i in range(n)]
    if (root / "manifest.json").exists():
        manifest = read_manifest(root)
        if manifest.config_hash != h:
            raise ConfigurationError(
                f"{root} holds a dataset from a different configuration ({manifest.config_hash[:12]} "
                f"vs {h[:12]}); refusing to resume")
    else:
        manifest = make_manifest(ids, tuple(cfg["dataset"]["ratios"]), cfg["seed"], h)
        root.mkdir(parents=True, exist_ok=True)
        write_manifest(root, manifest)
    t0 = time.perf_counter()
    for i, sid in enumerate(ids):
        if sid in manifest.checksums and (root / manifest.files[sid]).exists():
            try:
                read_sample(root, sid, manifest.checksums[sid], manifest.files[sid])
                continue
            except DatasetIntegrityError:
                logger.warning("sample %s is corrupt; regenerating", sid)
        sample, _ = make_sample(cfg, i)
        fname, digest = write_sample(root, sample, manifest.splits[sid], h)
        manifest.files[sid], manifest.checksums[sid] = fname, digest
        write_manifest(root, manifest)
        if progress:
            progress(i + 1, n, time.perf_counter() - t0)
    return manifest


def diffusion_from_config(cfg: dict, **overrides) -> STSDiffusion:
    d = dict(cfg["diffusion"])
    d["attention_positions"] = tuple(d["attention_positions"])
    d["channel_mults"] = tuple(d["channel_mults"])
    d.update(overrides)
    return STSDiffusion(random_state=cfg["seed"], **d)


def auxnet_from_config(cfg: dict, **overrides) -> ExtremaRegressor:
    d = dict(cfg["auxnet"])
    d["channels"] = tuple(d["channels"])
    d["pool"] = tuple(d["pool"])
    d.update(overrides)
    return ExtremaRegressor(random_state=cfg["seed"], **d)


def srpinn_from_config(cfg: dict, **overrides) -> STSRPINN:
    d = dict(cfg["srpinn"])
    d.update(overrides)
    return STSRPINN(random_state=cfg["seed"], **d)


def generated_stress_error(model: STSDiffusion, samples, seed: int = 0):
    """Aggregate and per-sample errors of generated s_xx against the stored FEM videos.

    Generated normalized videos are scaled by the true extrema, so the
    numbers isolate the diffusion model from the extrema regressor.
    """
    X, y, ext = stack_split(samples)
    gen = model.generate(X, seed=seed)
    div = np.abs(ext).max(axis=1)
    reports = [error_report(gen[i] * div[i], y[i] * div[i], s.sample_id) for i, s in enumerate(samples)]
    return aggregate(reports), reports


def material_from_sample(cfg: dict, sample: DatasetSample) -> MaterialField:
    if sample.phase_map is None:
        raise DatasetIntegrityError(sample.sample_id, "no phase map stored; cannot rebuild the material")
    mat = cfg["material"]
    return MaterialField.from_phase_map(sample.phase_map, sample.condition.grid_spacing, mat["phase1"],
                                        mat["phase2"])


def _frame_lcm(counts) -> int:
    return int(np.lcm.reduce([int(c) for c in counts]))


def fem_references(material: MaterialField, load, T: int, factors, cfl: float = 1.0,
                   components=("sxx", "syy", "sxy")) -> dict:
    """FEM stress videos on the grids that super-resolution ``factors`` produce.

    Spatial factors must be integers (the material map is refined by pixel
    replication); one solve per distinct spatial factor covers every
    temporal factor by saving frames at the least common multiple of the
    requested frame counts.
    """
    H, W = material.shape
    by_space = {}
    for f in factors:
        f = tuple(float(v) for v in f)
        if f[1] != f[2] or f[1] != int(f[1]):
            raise ConfigurationError(f"reference solves need equal integer spatial factors, got {f}")
        by_space.setdefault(int(f[1]), []).append(f)
    refs = {}
    for fs, group in sorted(by_space.items()):
        counts = [output_shape((T, H, W), f)[0] for f in group]
        n_fine = _frame_lcm(counts)
        t0 = time.perf_counter()
        sol = solve_elastodynamics(material.upsample(fs), load, n_fine, cfl=cfl)
        logger.info("reference FEM %dx%d with %d frames in %.0fs", H * fs, W * fs, n_fine,
                    time.perf_counter() - t0)
        for f, n in zip(group, counts):
            step = n_fine // n
            idx = np.arange(1, n + 1) * step - 1
            refs[f] = {c: sol.stress[c].values[idx] for c in components}
    return refs


def resolution_label(shape) -> str:
    return "x".join(str(n) for n in shape)


def srpinn_rme(model: STSRPINN, refs: dict, components=("sxx",)) -> dict:
    """{factor: {component: rme}} of a fitted model against ``fem_references`` output."""
    out = {}
    for f, ref in refs.items():
        videos = model.super_resolve(f, components)
        out[f] = {c: rme(videos[c].values, ref[c]) for c in components}
    return out


def sweep_weights(videos: dict, material: MaterialField, load, ratios, refs: dict, cfg: dict | None = None,
                  **srpinn_kwargs) -> tuple[dict, dict]:
    """Fit one SRPINN per (omega_op, omega_pi) ratio.

    Returns ({ratio label: {resolution label: rme of s_xx}}, {ratio label: fitted model}).
    """
    results, models = {}, {}
    for op, pi in ratios:
        label = f"{op:g}:{pi:g}"
        kw = dict(srpinn_kwargs, omega_op=float(op), omega_pi=float(pi))
        model = srpinn_from_config(cfg, **kw) if cfg is not None else STSRPINN(**kw)
        model.fit(videos, material, load)
        scores = srpinn_rme(model, refs)
        results[label] = {resolution_label(ref["sxx"].shape): s["sxx"] for (f, ref), s in
                          zip(refs.items(), scores.values())}
        models[label] = model
        logger.info("weights %s: %s", label, results[label])
    return results, models
