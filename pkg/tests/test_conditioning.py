import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from trmstress.conditioning import (ARRAY_KEYS, ConditionTensor, DatasetSample, assign_splits, build_condition,
                                    denormalize_stress, make_manifest, normalize_stress, rasterize_profile,
                                    read_dataset, read_sample, split_counts, stack_split, write_dataset)
from trmstress.elastodyn import LoadFamily, build_load_schedule, solve_elastodynamics
from trmstress.exceptions import DatasetIntegrityError, DegenerateSampleError, RejectedInputError


def test_rasterize_flat_and_extremes():
    p = rasterize_profile(np.zeros(5), 5, 5)
    assert (p[2] == 0).all() and p.sum() == 20
    top = rasterize_profile(np.ones(4), 6, 4)
    assert (top[5] == 0).all() and top[:5].all()
    bottom = rasterize_profile(-np.ones(4), 6, 4)
    assert (bottom[0] == 0).all()


def test_rasterize_connected():
    p = rasterize_profile(np.array([-1.0, 1.0, -1.0]), 9, 3)
    assert set(np.unique(p)) == {0.0, 1.0}
    # each column is a single vertical run and neighbouring runs touch
    runs = []
    for w in range(3):
        rows = np.flatnonzero(p[:, w] == 0)
        assert np.all(np.diff(rows) == 1)
        runs.append((rows.min(), rows.max()))
    for (a0, a1), (b0, b1) in zip(runs, runs[1:]):
        assert max(a0, b0) <= min(a1, b1) + 1


def test_condition_shape_and_channels(small_case):
    ms, iface, _, load = small_case
    cond = build_condition(ms, iface, load, 8)
    assert cond.channels.shape == (5, 8, 16, 16) and cond.channels.dtype == np.float32
    np.testing.assert_array_equal(cond.p1 + cond.p2, 1.0)
    np.testing.assert_array_equal(cond.p1[3], ms.phase_map)
    np.testing.assert_array_equal(cond.interface[0], iface.mask)
    assert cond.shape == (8, 16, 16)
    for k in range(8):
        assert np.unique(cond.magnitude[k]).size == 1


def test_condition_zero_amplitude(small_case):
    ms, iface, _, _ = small_case
    load = build_load_schedule(LoadFamily(amplitude_range=(0.0, 0.0), n_steps=21), seed=1)
    cond = build_condition(ms, iface, load, 4)
    assert not cond.magnitude.any()


def test_condition_single_phase(small_case):
    from trmstress.randfield import Microstructure, extract_interface

    _, _, _, load = small_case
    ms = Microstructure(np.ones((8, 8), np.uint8), 0.25, 1.0)
    cond = build_condition(ms, extract_interface(ms.phase_map), load, 3)
    assert cond.p1.all() and not cond.p2.any() and not cond.interface.any()


def test_condition_rejects_bad_shape():
    with pytest.raises(RejectedInputError):
        ConditionTensor(np.zeros((4, 2, 2, 2)))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 4, 5), elements=st.floats(-1e4, 1e4, allow_nan=False)))
def test_normalize_roundtrip(v):
    if not np.any(v):
        v = v.copy()
        v[0, 0, 0] = 1.0
    ns = normalize_stress(v)
    assert np.abs(ns.s0).max() == pytest.approx(1.0)
    back = denormalize_stress(ns.s0, ns.s_max, ns.s_min).values
    np.testing.assert_allclose(back, v, rtol=1e-6, atol=1e-6 * ns.divisor)


def test_normalize_examples():
    v = np.zeros((2, 2, 2))
    v[0, 0, 0], v[1, 1, 1] = 5.0, -10.0
    ns = normalize_stress(v)
    assert ns.divisor == 10.0 and ns.s0.max() == 0.5 and ns.s0.min() == -1.0
    v[1, 1, 1] = -7.0
    v[0, 0, 0] = 7.0
    ns = normalize_stress(v)
    assert ns.s0.max() == 1.0 and ns.s0.min() == -1.0
    assert not denormalize_stress(np.zeros((2, 3, 3)), 4.0, -2.0).values.any()


def test_normalize_rejects_zero_video():
    with pytest.raises(DegenerateSampleError):
        normalize_stress(np.zeros((2, 3, 3)))


def test_denormalize_zero_extrema_warns():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        out = denormalize_stress(np.ones((2, 2, 2)), 0.0, 0.0)
    assert not out.values.any() and w
    with pytest.raises(RejectedInputError):
        denormalize_stress(np.ones((2, 2, 2)), -1.0, 1.0)


@pytest.mark.parametrize("n,expect", [(10, (8, 1, 1)), (64, (52, 6, 6)), (1, (1, 0, 0)), (100, (80, 10, 10)), (2000, (1600, 200, 200))])
def test_split_counts(n, expect):
    assert split_counts(n) == expect


def test_split_assignment_deterministic():
    ids = [f"s{i}" for i in range(10)]
    a, b = assign_splits(ids, seed=3), assign_splits(ids, seed=3)
    assert a == b
    assert sorted(a.values()).count("train") == 8


@pytest.fixture(scope="module")
def stored(tmp_path_factory, small_case):
    ms, iface, mat, load = small_case
    sol = solve_elastodynamics(mat, load, 4)
    cond = build_condition(ms, iface, load, 4)
    samples = []
    for i in range(3):
        ns = normalize_stress(sol.sxx.values * (i + 1), cond)
        samples.append(DatasetSample(f"s{i:05d}", cond, ns.s0.astype(np.float32), ns.s_max, ns.s_min,
                                     ms.phase_map.astype(np.float32), load))
    root = tmp_path_factory.mktemp("ds")
    manifest = write_dataset(root, samples, make_manifest([s.sample_id for s in samples], seed=0))
    return root, samples, manifest


def test_write_read_bit_exact(stored):
    root, samples, manifest = stored
    back, m2 = read_dataset(root)
    assert m2.sample_ids == manifest.sample_ids and m2.checksums == manifest.checksums
    for a, b in zip(samples, back):
        for k, v in a.arrays().items():
            got = b.arrays()[k]
            assert got.dtype == np.dtype("<f4")
            assert got.tobytes() == v.tobytes(), k
    with np.load(root / manifest.files[samples[0].sample_id]) as z:
        assert set(ARRAY_KEYS) <= set(z.files)
        assert all(z[k].dtype == np.dtype("<f4") for k in z.files)
    X, y, ext = stack_split(back)
    assert X.shape == (3, 5, 4, 16, 16) and y.shape == (3, 4, 16, 16) and ext.shape == (3, 2)


def test_corrupt_and_missing_containers(stored, tmp_path):
    import shutil

    root, samples, manifest = stored
    copy = tmp_path / "copy"
    shutil.copytree(root, copy)
    sid = samples[1].sample_id
    path = copy / manifest.files[sid]
    data = bytearray(path.read_bytes())
    data[len(data) // 2] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(DatasetIntegrityError) as err:
        read_dataset(copy)
    assert sid in str(err.value)
    path.unlink()
    with pytest.raises(DatasetIntegrityError):
        read_sample(copy, sid, manifest.checksums[sid])
    with pytest.raises(DatasetIntegrityError):
        read_dataset(tmp_path / "nowhere")
