import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from trmstress.diffusion import (DiffusionSchedule, STSDiffusion, STUNet, STUNetConfig, forward_diffuse,
                                 forward_step, make_schedule, sample)
from trmstress.diffusion.stunet import count_parameters, rotary
from trmstress.exceptions import ConfigurationError, RejectedInputError

TINY = dict(base_channels=8, groups=4, heads=2)


def test_schedule_basics():
    s = make_schedule(10, 1e-4, 2e-2)
    assert s.T_d == 10 and s.beta[0] == 1e-4 and s.beta[-1] == pytest.approx(2e-2)
    assert s.alpha_bar_at(0) == 1.0
    np.testing.assert_allclose(s.alpha_bar_at(np.arange(1, 11)), np.cumprod(1 - s.beta))
    assert np.all(np.diff(s.alpha_bar) < 0)
    assert s.sigma(1) == 0.0
    for bad in ([0.0, 0.1], [0.5, 1.0], []):
        with pytest.raises(ConfigurationError):
            DiffusionSchedule(np.array(bad))
    with pytest.raises(ConfigurationError):
        make_schedule(10, 0.1, 0.01)


@pytest.mark.parametrize("t", [0, 11, 2.5])
def test_forward_rejects_bad_step(t):
    s = make_schedule(10)
    with pytest.raises(RejectedInputError):
        forward_diffuse(np.zeros(3), t, np.zeros(3), s)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 50), st.floats(-3, 3))
def test_forward_diffuse_matches_mixing_formula(t, x0):
    s = make_schedule(50)
    z = np.linspace(-2, 2, 5)
    ab = s.alpha_bar[t - 1]
    np.testing.assert_allclose(forward_diffuse(np.full(5, x0), t, z, s), np.sqrt(ab) * x0 + np.sqrt(1 - ab) * z)


def test_chained_steps_match_closed_form_moments():
    # composing single steps gives the same Gaussian as the closed form
    s = make_schedule(20, 1e-3, 0.1)
    rng = np.random.default_rng(0)
    x = np.full(200_000, 0.7)
    for t in range(1, 21):
        x = forward_step(x, t, rng.standard_normal(x.size), s)
    ab = s.alpha_bar[-1]
    assert x.mean() == pytest.approx(np.sqrt(ab) * 0.7, abs=0.01)
    assert x.var() == pytest.approx(1 - ab, rel=0.02)


def test_forward_diffuse_batched_torch():
    s = make_schedule(10)
    x0 = torch.ones(3, 2, 2)
    out = forward_diffuse(x0, np.array([1, 5, 10]), torch.zeros(3, 2, 2), s)
    np.testing.assert_allclose(out[:, 0, 0].numpy(), np.sqrt(s.alpha_bar[[0, 4, 9]]), rtol=1e-6)


def test_stunet_shapes_and_ablation():
    x = torch.randn(2, 6, 4, 8, 8)
    t = torch.tensor([1, 7])
    counts = {}
    for pos in [(), (1,), (4,), (1, 2, 3, 4, 5, 6, 7)]:
        net = STUNet(STUNetConfig(pos, **TINY))
        assert net(x, t).shape == (2, 1, 4, 8, 8)
        counts[pos] = count_parameters(net)
    assert counts[()] < counts[(1,)] < counts[(1, 2, 3, 4, 5, 6, 7)]
    with pytest.raises(ConfigurationError):
        STUNetConfig((0,), **TINY)
    with pytest.raises(ConfigurationError):
        STUNetConfig((3,), depth=2, channel_mults=(1, 2), **TINY)
    with pytest.raises(ConfigurationError):
        STUNet(STUNetConfig((), **TINY))(torch.randn(1, 6, 4, 6, 6), torch.tensor([1]))


def test_stunet_constant_input_gives_constant_output():
    torch.manual_seed(0)
    # float64: group norms of a constant divide rounding residues by sqrt(eps)
    net = STUNet(STUNetConfig((1, 4, 7), **TINY)).double().eval()
    with torch.no_grad():
        y = net(torch.full((1, 6, 4, 8, 8), 0.3, dtype=torch.float64), torch.tensor([3]))
    assert float(y.std() / y.abs().mean()) < 1e-6


def test_rotary_preserves_norm_and_relative_phase():
    q = torch.randn(1, 1, 6, 8)
    r = rotary(q)
    torch.testing.assert_close(r.norm(dim=-1), q.norm(dim=-1))
    # scores depend only on the offset between positions
    v = torch.randn(8).expand(1, 1, 6, 8)
    rv = rotary(v)
    dots = (rv[0, 0, :-1] * rv[0, 0, 1:]).sum(-1)
    torch.testing.assert_close(dots, dots[0].expand_as(dots), rtol=1e-5, atol=1e-5)


def _toy(n=4):
    rng = np.random.default_rng(0)
    X = rng.random((n, 5, 4, 8, 8)).astype(np.float32)
    y = np.tanh(X[:, 0] - X[:, 1]).astype(np.float32)
    return X, y


@pytest.fixture(scope="module")
def fitted():
    X, y = _toy()
    est = STSDiffusion(attention_positions=(4,), T_d=10, learning_rate=1e-3, max_epochs=4, eval_every=2,
                       batch_size=2, log_every=0, **TINY)
    return est.fit(X, y), X, y


def test_estimator_fit_generate_deterministic(fitted):
    est, X, y = fitted
    assert len(est.train_history_) == 4 and len(est.val_history_) == 2
    a, b = est.generate(X[:2], seed=5), est.generate(X[:2], seed=5)
    assert a.shape == (2, 4, 8, 8)
    np.testing.assert_array_equal(a, b)
    assert np.isfinite(est.score(X, y))
    again = STSDiffusion(**est.get_params()).fit(X, y)
    np.testing.assert_array_equal(again.generate(X[:1], seed=1), est.generate(X[:1], seed=1))


def test_checkpoint_roundtrip(fitted, tmp_path):
    est, X, _ = fitted
    est.save(tmp_path / "d.npz")
    with np.load(tmp_path / "d.npz") as z:
        assert any(k.startswith("param/") for k in z.files)
        assert "config_json" in z.files and "schedule_beta" in z.files
    back = STSDiffusion.load(tmp_path / "d.npz")
    np.testing.assert_array_equal(back.generate(X[:1], seed=2), est.generate(X[:1], seed=2))


def test_sampler_is_seeded():
    net = STUNet(STUNetConfig((), **TINY)).eval()
    cond = torch.zeros(1, 5, 4, 8, 8)
    s = make_schedule(5)
    torch.testing.assert_close(sample(net, s, cond, 3), sample(net, s, cond, 3))
    assert not torch.equal(sample(net, s, cond, 3), sample(net, s, cond, 4))


def test_fit_rejects_mismatch():
    X, y = _toy()
    with pytest.raises(RejectedInputError):
        STSDiffusion(T_d=5, max_epochs=1, **TINY).fit(X, y[:3])


def test_schedule_worked_example():
    s = DiffusionSchedule(np.array([0.1, 0.2, 0.3]))
    np.testing.assert_allclose(s.alpha_bar, [0.9, 0.72, 0.504], rtol=1e-12)


def test_forward_diffuse_limits():
    z = np.array([0.5, -1.0, 2.0])
    s0 = np.array([1.0, 2.0, -3.0])
    nearly_clean = DiffusionSchedule(np.full(3, 1e-14))
    np.testing.assert_allclose(forward_diffuse(s0, 3, z, nearly_clean), s0, atol=1e-6)
    s = make_schedule(20)
    np.testing.assert_allclose(forward_diffuse(np.zeros(3), 7, z, s), np.sqrt(1 - s.alpha_bar_at(7)) * z)


def test_forward_diffuse_per_pixel_mean_within_three_standard_errors():
    s = make_schedule(50)
    s0 = np.linspace(-1, 1, 6)
    n, t = 4000, 30
    z = np.random.default_rng(0).standard_normal((n, 6))
    draws = forward_diffuse(np.broadcast_to(s0, (n, 6)), t, z, s)
    se = np.sqrt((1 - s.alpha_bar_at(t)) / n)
    assert np.all(np.abs(draws.mean(0) - np.sqrt(s.alpha_bar_at(t)) * s0) < 3 * se)


class _OracleNoise:
    """Recovers the injected noise exactly from s_t, s0 and the schedule."""

    def __init__(self, sched, s0):
        self.sched, self.s0 = sched, s0

    def __call__(self, x, t_d):
        ab = torch.as_tensor(self.sched.alpha_bar_at(t_d.numpy()), dtype=x.dtype).reshape(-1, 1, 1, 1)
        return ((x[:, 0] - ab.sqrt() * self.s0) / (1 - ab).sqrt())[:, None]


def test_denoising_loss_stub_models():
    from trmstress.diffusion.model import denoising_loss

    s = make_schedule(10)
    s0 = torch.randn(3, 2, 8, 8, dtype=torch.float64, generator=torch.Generator().manual_seed(0))
    cond = torch.zeros(3, 5, 2, 8, 8, dtype=torch.float64)
    assert denoising_loss(_OracleNoise(s, s0), s, cond, s0, batch_size=8) < 1e-20
    zero = lambda x, t: torch.zeros_like(x[:, :1])
    assert denoising_loss(zero, s, cond, s0) == pytest.approx(1.0, abs=0.2)


def test_single_step_sampler_algebra():
    s = DiffusionSchedule(np.array([0.3]))
    cond = torch.zeros(2, 5, 2, 4, 4, dtype=torch.float64)
    eps = 0.25
    out = sample(lambda x, t: torch.full_like(x[:, :1], eps), s, cond, seed=5)
    x = torch.randn((2, 2, 4, 4), generator=torch.Generator().manual_seed(5), dtype=torch.float64)
    expect = (x - 0.3 / np.sqrt(0.3) * eps) / np.sqrt(0.7)
    torch.testing.assert_close(out, expect)


def test_stunet_full_resolution_shape():
    net = STUNet(STUNetConfig(attention_positions=(), **TINY)).eval()
    with torch.no_grad():
        out = net(torch.zeros(1, 6, 24, 64, 64), torch.tensor([3]))
    assert out.shape == (1, 1, 24, 64, 64)


def test_early_stopping_examples():
    from trmstress._training import EarlyStopping

    es = EarlyStopping(patience=10)
    assert not any(es.update(v) for v in np.linspace(1.0, 0.1, 40))
    es = EarlyStopping(patience=10)
    stops = [es.update(0.5) for _ in range(11)]
    assert stops.index(True) == 10
    es = EarlyStopping(patience=3)
    for v in [3.0, 1.0, 2.0, 1.5, 1.2]:
        es.update(v)
    assert es.best == min(es.history) and es.best_index == 1


def test_clipped_sampler_reduces_to_plain_update_when_inactive():
    s = make_schedule(6, 1e-2, 0.3)
    cond = torch.randn(2, 5, 2, 8, 8, dtype=torch.float64, generator=torch.Generator().manual_seed(2))
    net = STUNet(STUNetConfig(attention_positions=(), **TINY)).double().eval()
    plain = sample(net, s, cond, seed=3)
    torch.testing.assert_close(sample(net, s, cond, seed=3, clip=1e12), plain, rtol=1e-9, atol=1e-9)
    clipped = sample(net, s, cond, seed=3, clip=1.0)
    assert clipped.abs().max() <= 1.0 + 1e-12
