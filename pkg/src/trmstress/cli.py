"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import metrics
from .conditioning import (DatasetSample, make_manifest, read_dataset, read_manifest,
                           read_sample, stack_split, write_manifest, write_sample)
from .config import PRESETS, config_hash, data_hash, dump, load_config
from .auxnet import ExtremaRegressor, divisor_relative_error
from .diffusion import STSDiffusion
from .exceptions import (ConfigurationError, DatasetIntegrityError, RejectedInputError, SolverError,
                         TrainingDivergenceError)
from . import pipeline

logger = logging.getLogger("trmstress")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _parse_factors(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.replace("x", ",").split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad factors {text!r}") from exc
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("factors need three numbers, e.g. 1.25,2,2")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML file overriding the preset")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--preset", choices=PRESETS, default="desk")
    common.add_argument("--out", type=Path, default=Path("runs"), help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="trmstress", description="Stress-video generation and super-resolution")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("dataset", parents=[common], help="generate microstructures, loads and FEM stress videos")

    for name, text in (("train-diffusion", "train the conditional diffusion model"),
                       ("train-aux", "train the extrema regressor")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--dataset", type=Path, help="dataset directory (default OUT/dataset)")

    s = sub.add_parser("generate", parents=[common], help="sample stress videos for stored conditions")
    s.add_argument("--dataset", type=Path, help="directory with conditions (default OUT/dataset)")
    s.add_argument("--split", default="test", help="split to generate for, or 'all'")
    s.add_argument("--input", type=Path, nargs="*", help="individual condition containers (.npz)")
    s.add_argument("--diffusion", type=Path, help="diffusion checkpoint (default OUT/diffusion.npz)")
    s.add_argument("--auxnet", type=Path, help="auxnet checkpoint (default OUT/auxnet.npz)")

    s = sub.add_parser("superres", parents=[common], help="physics-informed super-resolution of one video")
    s.add_argument("--input", type=Path, help="stress container (.npz); default: config superres.sample")
    s.add_argument("--dataset", type=Path, help="dataset holding the sample (default OUT/dataset)")
    s.add_argument("--factors", type=_parse_factors, action="append", help="f_t,f_h,f_w (repeatable)")
    s.add_argument("--no-plots", action="store_true")

    s = sub.add_parser("eval", parents=[common], help="error table of predictions against references")
    s.add_argument("--pred", type=Path, required=True, help="prediction dataset directory")
    s.add_argument("--ref", type=Path, required=True, help="reference dataset directory")
    s.add_argument("--normalized", action="store_true", help="compare normalized videos s0")
    s.add_argument("--downsample", action="store_true", help="allow resampling predictions to the reference grid")
    s.add_argument("--force", action="store_true", help="compare artifacts from different configurations")

    s = sub.add_parser("ablate-attention", parents=[common], help="train one model per attention placement")
    s.add_argument("--dataset", type=Path)

    s = sub.add_parser("sweep-weights", parents=[common], help="super-resolution error per loss-weight ratio")
    s.add_argument("--dataset", type=Path)
    return p


# ----------------------------------------------------------------------
# helpers


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, default=float))


def _dataset_dir(args) -> Path:
    return args.dataset if getattr(args, "dataset", None) else args.out / "dataset"


def _splits(root: Path):
    train, _ = read_dataset(root, "train")
    val, manifest = read_dataset(root, "val")
    test, _ = read_dataset(root, "test")
    if not train:
        raise ConfigurationError(f"training split of {root} is empty")
    return train, val, test, manifest


def _curve(path: Path, history) -> None:
    lines = ["epoch\tvalidation_loss"] + [f"{e}\t{v:.8g}" for e, v in history]
    path.write_text("\n".join(lines) + "\n")


def _train_diffusion(cfg, train, val, **overrides) -> STSDiffusion:
    X, y, _ = stack_split(train)
    Xv, yv, _ = stack_split(val) if val else (None, None, None)
    return pipeline.diffusion_from_config(cfg, **overrides).fit(X, y, Xv, yv)


# ----------------------------------------------------------------------
# commands


def cmd_dataset(args, cfg) -> int:
    root = args.out / "dataset"

    def progress(i, n, secs):
        logger.info("dataset: %d/%d samples (%.0fs)", i, n, secs)

    manifest = pipeline.generate_dataset(cfg, root, progress)
    (root / "config.yaml").write_text(dump(cfg))
    logger.info("dataset at %s: %s", root, manifest.sizes())
    return EXIT_OK


def cmd_train_diffusion(args, cfg) -> int:
    train, val, _, manifest = _splits(_dataset_dir(args))
    model = _train_diffusion(cfg, train, val)
    args.out.mkdir(parents=True, exist_ok=True)
    model.save(args.out / "diffusion.npz")
    _curve(args.out / "diffusion_curve.tsv", model.val_history_)
    _write_json(args.out / "diffusion_run.json", {
        "config_hash": config_hash(cfg), "data_hash": manifest.config_hash, "best_epoch": model.best_epoch_,
        "best_val_loss": model.best_val_loss_, "epochs_run": model.epochs_run_,
        "train_seconds": model.train_seconds_, "n_parameters": model.n_parameters_})
    logger.info("diffusion: best validation %.4e at epoch %d", model.best_val_loss_, model.best_epoch_)
    return EXIT_OK


def cmd_train_aux(args, cfg) -> int:
    train, val, test, manifest = _splits(_dataset_dir(args))
    X, _, ext = stack_split(train)
    Xv, _, extv = stack_split(val) if val else (None, None, None)
    model = pipeline.auxnet_from_config(cfg).fit(X, ext, Xv, extv)
    args.out.mkdir(parents=True, exist_ok=True)
    model.save(args.out / "auxnet.npz")
    _curve(args.out / "auxnet_curve.tsv", model.val_history_)
    summary = {"config_hash": config_hash(cfg), "data_hash": manifest.config_hash,
               "best_val_loss": model.best_val_loss_, "epochs_run": model.epochs_run_}
    if test:
        Xt, _, extt = stack_split(test)
        err = divisor_relative_error(model.predict(Xt), extt)
        summary["test_divisor_rel_error_mean"] = float(err.mean())
        summary["test_divisor_rel_error_max"] = float(err.max())
        logger.info("auxnet: held-out divisor relative error mean %.3f max %.3f", err.mean(), err.max())
    _write_json(args.out / "auxnet_run.json", summary)
    return EXIT_OK


def cmd_generate(args, cfg) -> int:
    diff = STSDiffusion.load(args.diffusion or args.out / "diffusion.npz")
    aux_path = args.auxnet or args.out / "auxnet.npz"
    aux = ExtremaRegressor.load(aux_path) if aux_path.exists() else None
    if aux is None:
        logger.warning("no auxnet checkpoint at %s; generated videos keep unit extrema", aux_path)
    if args.input:
        samples = []
        for path in args.input:
            samples.append(read_sample(path.parent, path.stem, fname=path.name))
        src_hash = ""
    else:
        root = _dataset_dir(args)
        samples, manifest = read_dataset(root, None if args.split == "all" else args.split)
        src_hash = manifest.config_hash
    if not samples:
        raise ConfigurationError("nothing to generate")
    X = np.stack([s.condition.channels for s in samples])
    s0_hat = diff.generate(X, seed=cfg["generation"]["seed"], batch_size=cfg["generation"]["batch_size"])
    ext = aux.predict(X) if aux is not None else np.tile([1.0, -1.0], (len(samples), 1))
    out = args.out / "generated"
    ids = [s.sample_id for s in samples]
    gm = make_manifest(ids, (1, 0, 0), cfg["seed"], src_hash)
    gm.splits = {sid: "test" for sid in ids}
    for i, s in enumerate(samples):
        g = DatasetSample(s.sample_id, s.condition, s0_hat[i].astype(np.float32), float(ext[i, 0]),
                          float(ext[i, 1]), s.phase_map, s.load,
                          {"source": "diffusion", "producer_config_hash": config_hash(cfg)})
        gm.files[s.sample_id], gm.checksums[s.sample_id] = write_sample(out, g, "test", src_hash)
    write_manifest(out, gm)
    logger.info("generated %d videos into %s", len(samples), out)
    return EXIT_OK


def _save_frames(video: np.ndarray, directory: Path, prefix: str) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    directory.mkdir(parents=True, exist_ok=True)
    lim = float(np.abs(video).max()) or 1.0
    for k, frame in enumerate(video):
        plt.imsave(directory / f"{prefix}_t{k:03d}.png", frame, cmap="RdBu_r", vmin=-lim, vmax=lim,
                   origin="lower")
    return len(video)


def cmd_superres(args, cfg) -> int:
    if args.input:
        sample = read_sample(args.input.parent, args.input.stem, fname=args.input.name)
    else:
        samples, _ = read_dataset(_dataset_dir(args))
        idx = cfg["superres"]["sample"]
        if not 0 <= idx < len(samples):
            raise ConfigurationError(f"superres.sample {idx} out of range (dataset has {len(samples)})")
        sample = samples[idx]
    if sample.load is None:
        raise DatasetIntegrityError(sample.sample_id, "no load schedule stored")
    factors = args.factors or cfg["superres"]["factors"]
    for f in factors:
        if min(f) <= 0:
            raise RejectedInputError(f"factors must be positive, got {f}")
    material = pipeline.material_from_sample(cfg, sample)
    model = pipeline.srpinn_from_config(cfg).fit({"sxx": sample.s_fem()}, material, sample.load)
    out = args.out / "superres"
    chash = config_hash(cfg)
    for f in factors:
        tag = "x".join(f"{v:g}" for v in f)
        videos = model.super_resolve(tuple(f))
        arrays = {k: np.ascontiguousarray(v.values, dtype="<f4") for k, v in videos.items()}
        out.mkdir(parents=True, exist_ok=True)
        np.savez(out / f"{sample.sample_id}_{tag}.npz", **arrays)
        _write_json(out / f"{sample.sample_id}_{tag}.json", {
            "sample_id": sample.sample_id, "factors": f, "shape": list(arrays["sxx"].shape),
            "config_hash": chash, "dt": videos["sxx"].dt, "grid_spacing": videos["sxx"].grid_spacing})
        if cfg["superres"]["plots"] and not args.no_plots:
            for comp in ("sxx", "syy", "sxy"):
                _save_frames(arrays[comp], out / "plots" / tag, comp)
        logger.info("superres %s -> %s", tag, arrays["sxx"].shape)
    return EXIT_OK


def _resample(pred: np.ndarray, shape) -> np.ndarray:
    """Nearest sampling of a [T, H, W] video onto another grid over the same domain."""
    idx = [np.minimum((np.arange(n) + 0.5) * p / n, p - 1).astype(int) for n, p in zip(shape, pred.shape)]
    return pred[np.ix_(*idx)]


def cmd_eval(args, cfg) -> int:
    pm, rm = read_manifest(args.pred), read_manifest(args.ref)
    if pm.config_hash != rm.config_hash and not args.force:
        raise ConfigurationError("prediction and reference come from different configurations; use --force")
    rows = []
    for sid in pm.sample_ids:
        if sid not in rm.sample_ids:
            raise DatasetIntegrityError(sid, "not present in the reference dataset")
        p = read_sample(args.pred, sid, pm.checksums.get(sid), pm.files.get(sid))
        r = read_sample(args.ref, sid, rm.checksums.get(sid), rm.files.get(sid))
        pv = p.s0 if args.normalized else p.s_fem()
        rv = r.s0 if args.normalized else r.s_fem()
        if pv.shape != rv.shape:
            if not args.downsample:
                raise RejectedInputError(f"{sid}: resolution {pv.shape} vs {rv.shape}; pass --downsample")
            pv = _resample(pv, rv.shape)
        rows.append(metrics.error_report(pv, rv, sid, config_hash=pm.config_hash))
    if not rows:
        raise ConfigurationError("no samples to evaluate")
    agg = metrics.aggregate(rows)
    table = metrics.format_table(rows + [agg], ["sample_id", "resolution", "mean_error", "rme", "config_hash"])
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "eval.tsv").write_text(table)
    print(table, end="")
    return EXIT_OK


def cmd_ablate(args, cfg) -> int:
    train, val, test, manifest = _splits(_dataset_dir(args))
    if not test:
        raise ConfigurationError("test split is empty")
    results = {}
    for positions in cfg["ablation"]["configurations"]:
        label = " ".join(str(p) for p in positions) or "None"
        t0 = time.perf_counter()
        model = _train_diffusion(cfg, train, val, attention_positions=tuple(positions))
        hours = (time.perf_counter() - t0) / 3600
        agg, _ = pipeline.generated_stress_error(model, test, cfg["generation"]["seed"])
        results[label] = {"train_hours": hours, "rme": agg.rme, "mean_error": agg.mean_error}
        logger.info("attention %s: RME %.4f (%.2f h)", label, agg.rme, hours)
    table = metrics.attention_table(results)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "ablation.tsv").write_text(table)
    _write_json(args.out / "ablation.json", {"config_hash": config_hash(cfg), "data_hash": manifest.config_hash,
                                             "results": results})
    print(table, end="")
    return EXIT_OK


def cmd_sweep(args, cfg) -> int:
    samples, _ = read_dataset(_dataset_dir(args))
    idx = cfg["superres"]["sample"]
    if not 0 <= idx < len(samples):
        raise ConfigurationError(f"superres.sample {idx} out of range")
    sample = samples[idx]
    if sample.load is None:
        raise DatasetIntegrityError(sample.sample_id, "no load schedule stored")
    material = pipeline.material_from_sample(cfg, sample)
    factors = [tuple(f) for f in cfg["superres"]["factors"]]
    refs = pipeline.fem_references(material, sample.load, sample.s0.shape[0], factors, cfg["fem"]["cfl"])
    results, _ = pipeline.sweep_weights({"sxx": sample.s_fem()}, material, sample.load,
                                        [tuple(r) for r in cfg["sweep"]["ratios"]], refs, cfg)
    table = metrics.weight_table(results)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "sweep.tsv").write_text(table)
    _write_json(args.out / "sweep.json", {"config_hash": config_hash(cfg), "data_hash": data_hash(cfg),
                                          "results": results})
    print(table, end="")
    return EXIT_OK


COMMANDS = {
    "dataset": cmd_dataset,
    "train-diffusion": cmd_train_diffusion,
    "train-aux": cmd_train_aux,
    "generate": cmd_generate,
    "superres": cmd_superres,
    "eval": cmd_eval,
    "ablate-attention": cmd_ablate,
    "sweep-weights": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        cfg = load_config(args.config, args.preset, args.seed)
        return COMMANDS[args.command](args, cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetIntegrityError, RejectedInputError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SolverError, TrainingDivergenceError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
