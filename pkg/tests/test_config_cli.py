import json

import numpy as np
import pytest
import yaml

from trmstress.cli import main
from trmstress.config import config_hash, data_hash, load_config, preset
from trmstress.conditioning import read_dataset, read_manifest
from trmstress.exceptions import ConfigurationError

TINY = {
    "spectral": {"n1": 8, "n2": 8},
    "grid": {"T": 4, "H": 8, "W": 8},
    "load": {"n_steps": 41, "n_edge": 17, "duration": 1.0e-6},
    "dataset": {"n_samples": 6},
    "diffusion": {"base_channels": 8, "groups": 4, "heads": 2, "T_d": 5, "max_epochs": 2, "eval_every": 1,
                  "max_seconds": None},
    "auxnet": {"channels": [8, 16], "heads": 2, "hidden": 16, "max_epochs": 3, "eval_every": 1},
    "srpinn": {"u_layers": 2, "s_layers": 2, "width": 16, "epochs": 3, "n_collocation": 64,
               "n_boundary": 16, "obs_batch_size": 128},
    "superres": {"factors": [[1, 1, 1], [1.25, 2, 2]]},
    "ablation": {"configurations": [[], [4]]},
    "sweep": {"ratios": [[1, 1], [1, 5]]},
}


def test_presets():
    desk, paper = preset("desk"), preset("paper")
    assert desk["grid"] == {"T": 16, "H": 32, "W": 32} and desk["dataset"]["n_samples"] == 64
    assert paper["grid"] == {"T": 24, "H": 64, "W": 64} and paper["dataset"]["n_samples"] == 2000
    assert paper["diffusion"]["learning_rate"] == 1e-9 and paper["diffusion"]["T_d"] == 1000
    with pytest.raises(ConfigurationError):
        preset("huge")


def test_load_config_layers(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump({"grid": {"T": 8}}))
    cfg = load_config(p, "desk", seed=9)
    assert cfg["grid"] == {"T": 8, "H": 32, "W": 32} and cfg["seed"] == 9
    p.write_text("grid:\n  TT: 3\n")
    with pytest.raises(ConfigurationError, match="grid.TT"):
        load_config(p)
    with pytest.raises(ConfigurationError):
        load_config(overrides={"superres": {"factors": [[0, 1, 1]]}})
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.yaml")


def test_hashes():
    a = preset("desk")
    b = preset("desk")
    assert config_hash(a) == config_hash(b)
    b["diffusion"]["T_d"] = 7
    assert config_hash(a) != config_hash(b) and data_hash(a) == data_hash(b)
    b["seed"] = 1
    assert data_hash(a) != data_hash(b)


@pytest.fixture(scope="module")
def tiny_config(tmp_path_factory):
    d = tmp_path_factory.mktemp("cfg")
    p = d / "tiny.yaml"
    p.write_text(yaml.safe_dump(TINY))
    return p


def test_unknown_key_exits_2(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("diffusion:\n  attention_slots: [1]\n")
    assert main(["dataset", "--config", str(p), "--out", str(tmp_path)]) == 2
    assert "diffusion.attention_slots" in capsys.readouterr().err


def test_bad_arguments_exit_2(tmp_path):
    assert main(["nonsense"]) == 2
    assert main(["dataset", "--preset", "tiny"]) == 2
    assert main(["superres", "--factors", "1,2"]) == 2


def test_missing_dataset_exits_3(tmp_path, tiny_config):
    assert main(["train-diffusion", "--config", str(tiny_config), "--out", str(tmp_path)]) == 3


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory, tiny_config):
    out = tmp_path_factory.mktemp("run")
    assert main(["dataset", "--config", str(tiny_config), "--seed", "3", "--out", str(out)]) == 0
    return out


def _args(tiny_config, out, *extra):
    return [*extra, "--config", str(tiny_config), "--seed", "3", "--out", str(out)]


def test_dataset_layout_and_resume(run_dir, tiny_config):
    root = run_dir / "dataset"
    m = read_manifest(root)
    assert m.sizes() == {"train": 4, "val": 1, "test": 1}
    stamps = {f: (root / f).stat().st_mtime_ns for f in m.files.values()}
    assert main(["dataset", *_args(tiny_config, run_dir)]) == 0
    assert read_manifest(root).checksums == m.checksums
    assert {f: (root / f).stat().st_mtime_ns for f in m.files.values()} == stamps
    # a different data configuration refuses to resume into the same directory
    assert main(["dataset", "--config", str(tiny_config), "--seed", "4", "--out", str(run_dir)]) == 2
    samples, _ = read_dataset(root)
    assert samples[0].s0.shape == (4, 8, 8)


def test_dataset_rerun_is_reproducible(run_dir, tiny_config, tmp_path):
    assert main(["dataset", "--config", str(tiny_config), "--seed", "3", "--out", str(tmp_path)]) == 0
    assert read_manifest(tmp_path / "dataset").checksums == read_manifest(run_dir / "dataset").checksums


def test_train_generate_eval(run_dir, tiny_config):
    assert main(["train-diffusion", *_args(tiny_config, run_dir)]) == 0
    assert main(["train-aux", *_args(tiny_config, run_dir)]) == 0
    for f in ("diffusion.npz", "diffusion_curve.tsv", "diffusion_run.json", "auxnet.npz", "auxnet_run.json"):
        assert (run_dir / f).exists(), f
    with np.load(run_dir / "diffusion.npz") as z:
        cfg = json.loads(str(z["config_json"]))
        assert cfg["T_d"] == 5 and z["schedule_beta"].shape == (5,)
    assert main(["generate", *_args(tiny_config, run_dir)]) == 0
    gen, _ = read_dataset(run_dir / "generated")
    assert len(gen) == 1 and gen[0].s0.shape == (4, 8, 8)
    assert main(["eval", "--pred", str(run_dir / "generated"), "--ref", str(run_dir / "dataset"),
                 *_args(tiny_config, run_dir / "eval")]) == 0
    table = (run_dir / "eval" / "eval.tsv").read_text().splitlines()
    assert table[0].split("\t")[:4] == ["sample_id", "resolution", "mean_error", "rme"]
    assert table[-1].startswith("aggregate")


def test_superres_outputs(run_dir, tiny_config):
    out = run_dir / "sr"
    assert main(["superres", "--dataset", str(run_dir / "dataset"), *_args(tiny_config, out)]) == 0
    files = sorted(p.name for p in (out / "superres").glob("*.npz"))
    assert len(files) == 2
    assert files == ["s00000_1.25x2x2.npz", "s00000_1x1x1.npz"]
    with np.load(out / "superres" / "s00000_1.25x2x2.npz") as z:
        assert z["sxx"].shape == (5, 16, 16) and z["sxx"].dtype == np.dtype("<f4")
    assert len(list((out / "superres" / "plots").rglob("sxx_t*.png"))) == 4 + 5
    assert main(["superres", "--dataset", str(run_dir / "dataset"), "--factors", "0,1,1", "--no-plots",
                 *_args(tiny_config, out)]) != 0


def test_ablation_and_sweep(run_dir, tiny_config):
    assert main(["ablate-attention", "--dataset", str(run_dir / "dataset"), *_args(tiny_config, run_dir)]) == 0
    rows = (run_dir / "ablation.tsv").read_text().splitlines()
    assert len(rows) == 3 and rows[1].startswith("None")
    assert main(["sweep-weights", "--dataset", str(run_dir / "dataset"), *_args(tiny_config, run_dir)]) == 0
    rows = (run_dir / "sweep.tsv").read_text().splitlines()
    assert rows[0] == "weight\tresolution\trme_sxx" and len(rows) == 1 + 2 * 2


def test_training_curve_rows_match_evaluations(run_dir, tiny_config):
    # runs after test_train_generate_eval; diffusion evaluates every epoch for 2 epochs
    rows = (run_dir / "diffusion_curve.tsv").read_text().splitlines()
    assert len(rows) == 1 + 2


def test_eval_reference_against_itself_is_zero(run_dir, tiny_config):
    out = run_dir / "self_eval"
    assert main(["eval", "--pred", str(run_dir / "dataset"), "--ref", str(run_dir / "dataset"),
                 *_args(tiny_config, out)]) == 0
    rows = [r.split("\t") for r in (out / "eval.tsv").read_text().splitlines()[1:]]
    assert len(rows) == 6 + 1
    assert all(float(r[2]) == 0.0 and float(r[3]) == 0.0 for r in rows)


def test_interrupted_dataset_resumes_to_identical_manifest(run_dir, tmp_path):
    from trmstress import pipeline

    cfg = load_config(overrides=TINY, seed=3)

    def interrupt(i, n, elapsed):
        if i == 2:
            raise KeyboardInterrupt

    with pytest.raises(KeyboardInterrupt):
        pipeline.generate_dataset(cfg, tmp_path / "ds", progress=interrupt)
    assert len(read_manifest(tmp_path / "ds").checksums) == 2
    done = []
    pipeline.generate_dataset(cfg, tmp_path / "ds", progress=lambda i, n, e: done.append(i))
    assert done == [3, 4, 5, 6]
    assert read_manifest(tmp_path / "ds").to_json() == read_manifest(run_dir / "dataset").to_json()
