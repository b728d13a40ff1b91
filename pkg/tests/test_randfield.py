import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trmstress.exceptions import ConfigurationError, RejectedInputError
from trmstress.randfield import (Microstructure, SpectralConfig, autocorrelation, empirical_autocorrelation,
                                 extract_interface, generate_microstructure, sample_shf_field,
                                 save_microstructure_png, spectral_density, threshold_microstructure)


def test_autocorrelation_values():
    cfg = SpectralConfig()
    assert autocorrelation(0.0, 0.0, cfg) == 1.0
    assert autocorrelation(cfg.c1, 0.0, cfg) == pytest.approx(math.exp(-1), abs=1e-12)
    assert autocorrelation(0.1, -0.2, cfg) == autocorrelation(-0.1, 0.2, cfg)
    with pytest.raises(RejectedInputError):
        autocorrelation(np.nan, 0.0, cfg)


def test_spectral_density_values():
    cfg = SpectralConfig(c1=1.0, c2=1.0)
    assert spectral_density(0.0, 0.0, cfg) == pytest.approx(1 / (4 * math.pi), rel=1e-12)
    assert spectral_density(1.3, 0.4, cfg) == spectral_density(-1.3, 0.4, cfg)
    w = np.linspace(0, 20, 50)
    assert np.all(np.diff(spectral_density(w, 0.0, cfg)) < 0)


def test_wiener_khinchin_pair():
    # 2D cosine transform of the density recovers the autocorrelation
    cfg = SpectralConfig(c1=0.25, c2=0.4)
    w1 = np.linspace(-40, 40, 1601)
    w2 = np.linspace(-30, 30, 1201)
    S = spectral_density(w1[:, None], w2[None], cfg)
    for d1, d2 in [(0.0, 0.0), (0.1, 0.0), (0.2, 0.3), (0.4, -0.1)]:
        integrand = S * np.cos(w1[:, None] * d1 + w2[None] * d2)
        val = np.trapezoid(np.trapezoid(integrand, w2, axis=1), w1)
        assert val == pytest.approx(autocorrelation(d1, d2, cfg), rel=0.02, abs=1e-4)


def test_partition_tiles_domain():
    cfg = SpectralConfig(n1=5, n2=7)
    e1, e2 = cfg.partition()
    assert e1[0] == cfg.omega1_lower and e1[-1] == cfg.omega1_upper
    assert np.all(np.diff(e1) > 0) and np.all(np.diff(e2) > 0)
    assert cfg.omega1_upper == pytest.approx(6 / cfg.c1)


@pytest.mark.parametrize("kw", [dict(c1=0.0), dict(n1=0), dict(omega1_lower=1.0, omega1_upper=1.0)])
def test_config_rejects_invalid(kw):
    with pytest.raises(ConfigurationError):
        SpectralConfig(**kw)


def test_field_deterministic_and_shape():
    a = sample_shf_field(SpectralConfig(rng_seed=5), 20, 30)
    b = sample_shf_field(SpectralConfig(rng_seed=5), 20, 30)
    c = sample_shf_field(SpectralConfig(rng_seed=6), 20, 30)
    assert a.values.shape == (20, 30)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_field_mean_and_variance_over_realizations():
    cfg = SpectralConfig(n1=8, n2=8)
    samples = [sample_shf_field(cfg.with_seed(s), 8, 8) for s in range(500)]
    vals = np.array([f.values[3, 4] for f in samples])
    # two cosines per cell with variance A^2 / 2 each; frequencies vary per realization
    total = np.mean([np.sum(f.amplitudes ** 2) for f in samples])
    assert abs(vals[:200].mean()) < 0.05 * vals[:200].std() + 3 * vals[:200].std() / np.sqrt(200)
    assert vals.var() == pytest.approx(total, rel=0.10)


def test_threshold_counts():
    fld = sample_shf_field(SpectralConfig(rng_seed=1), 64, 64)
    assert threshold_microstructure(fld, 0.5).phase_map.sum() == 2048
    assert threshold_microstructure(fld, 0.3).phase_map.sum() == 1229
    const = threshold_microstructure(np.zeros((64, 64)), 0.25).phase_map
    assert const.sum() == 1024
    assert const.ravel()[:1024].all() and not const.ravel()[1024:].any()
    with pytest.raises(RejectedInputError):
        threshold_microstructure(fld, 1.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), lo=st.floats(0.05, 0.9), step=st.floats(0.0, 0.09))
def test_threshold_monotone(seed, lo, step):
    fld = sample_shf_field(SpectralConfig(n1=6, n2=6, rng_seed=seed), 12, 12)
    a = threshold_microstructure(fld, lo).phase_map.astype(bool)
    b = threshold_microstructure(fld, lo + step).phase_map.astype(bool)
    assert not np.any(a & ~b)


def test_interface_examples():
    assert not extract_interface(np.ones((5, 5), int)).mask.any()
    checker = np.indices((2, 2)).sum(0) % 2
    assert extract_interface(checker).mask.all()
    half = np.zeros((4, 4), int)
    half[:, :2] = 1
    expect = np.zeros((4, 4), bool)
    expect[:, 1:3] = True
    np.testing.assert_array_equal(extract_interface(half).mask, expect)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_interface_label_swap_invariant(seed):
    pm = np.random.default_rng(seed).integers(0, 2, (9, 11))
    np.testing.assert_array_equal(extract_interface(pm).mask, extract_interface(1 - pm).mask)


def test_interface_definition_matches_neighbours():
    ms, iface = generate_microstructure(SpectralConfig(rng_seed=2), 0.5, 24, 24)
    pm = ms.phase_map
    p = np.pad(pm, 1, mode="edge")
    diff = ((p[1:-1, :-2] != pm) | (p[1:-1, 2:] != pm) | (p[:-2, 1:-1] != pm) | (p[2:, 1:-1] != pm))
    np.testing.assert_array_equal(iface.mask, diff)


def test_empirical_autocorrelation_small_sample():
    cfg = SpectralConfig()
    fields = [sample_shf_field(cfg.with_seed(s), 32, 32).values for s in range(30)]
    acf = empirical_autocorrelation(fields, 4)
    assert acf.shape == (9, 9)
    assert acf[4, 4] == pytest.approx(1.0)


def test_png_export(tmp_path):
    from PIL import Image

    ms = Microstructure(np.eye(4, dtype=np.uint8), 0.25, 0.5)
    save_microstructure_png(ms, tmp_path / "m.png")
    img = np.asarray(Image.open(tmp_path / "m.png"))
    assert set(np.unique(img)) == {0, 255}
    assert img.shape == (4, 4)
