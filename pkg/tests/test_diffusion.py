import numpy as np
import pytest

from anisoshift.diffusion import (
    SamplerConfig,
    complex_normal,
    forward_marginal_sample,
    forward_step,
    noise_field,
    prior_std_coeff,
    reverse_step,
    run_reverse,
    sample_prior,
)
from anisoshift.errors import ContractError, InvalidInputError, NumericalError
from anisoshift.schedule import build_geometric_schedule

from stats import assert_moments

SCH = build_geometric_schedule()
N = 50_000


def cgrid(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def grids():
    rng = np.random.default_rng(0)
    return cgrid(rng, (4, 4)), cgrid(rng, (4, 4)), rng.uniform(0, 1, (4, 4))


def test_complex_noise_convention():
    z = complex_normal(np.random.default_rng(1), (200_000,))
    assert abs(np.var(z.real) - 0.5) < 0.01
    assert abs(np.var(z.imag) - 0.5) < 0.01
    assert abs(np.mean(z.real * z.imag)) < 0.01
    assert abs(np.mean(np.abs(z) ** 2) - 1.0) < 0.01


def test_forward_step_zero_guidance_is_deterministic(grids):
    x0, y, _ = grids
    g = np.zeros((4, 4))
    x = forward_step(x0, x0, y, g, SCH, 3, np.random.default_rng(0))
    assert np.array_equal(x, x0 + SCH.alpha[3] * (y - x0))
    same = forward_step(x0, x0, x0, g, SCH, 3, np.random.default_rng(0))
    assert np.array_equal(same, x0)


def test_forward_step_variance(grids):
    x0, y, g = grids
    rng = np.random.default_rng(2)
    tile = lambda a: np.broadcast_to(a, (N, 4, 4)).copy()
    x = forward_step(tile(x0), tile(x0), tile(y), tile(g), SCH, 4, rng)
    assert_moments(x, x0 + SCH.alpha[4] * (y - x0), SCH.kappa ** 2 * SCH.alpha[4] * g ** 2)


def test_isotropic_forward_matches_unguided_process(grids):
    x0, y, _ = grids
    rng = np.random.default_rng(3)
    tile = lambda a: np.broadcast_to(a, (N, 4, 4)).copy()
    ones = noise_field(np.zeros((4, 4)), SamplerConfig("isotropic"))
    x = forward_step(tile(x0), tile(x0), tile(y), tile(ones), SCH, 2, rng)
    assert_moments(x, x0 + SCH.alpha[2] * (y - x0), np.full((4, 4), SCH.kappa ** 2 * SCH.alpha[2]))


def test_marginal_deterministic_cases(grids):
    x0, y, g = grids
    zero = np.zeros((4, 4))
    out = forward_marginal_sample(x0, y, zero, SCH, 5, np.random.default_rng(0))
    assert np.array_equal(out, (1 - SCH.alpha_bar[5]) * x0 + SCH.alpha_bar[5] * y)
    mean1 = (1 - SCH.alpha_bar[1]) * x0 + SCH.alpha_bar[1] * y
    assert np.all(np.abs(mean1 - x0) <= 0.001 * np.abs(y - x0) + 1e-15)


def test_shape_and_range_errors(grids):
    x0, y, g = grids
    rng = np.random.default_rng(0)
    with pytest.raises(InvalidInputError):
        forward_step(x0, x0, y, g[:3], SCH, 1, rng)
    with pytest.raises(IndexError):
        forward_step(x0, x0, y, g, SCH, 0, rng)
    with pytest.raises(IndexError):
        forward_marginal_sample(x0, y, g, SCH, 7, rng)
    with pytest.raises(IndexError):
        reverse_step(x0, x0, g, SCH, 7, SamplerConfig(), rng)


def test_prior(grids):
    _, y, g = grids
    g = g.copy()
    g[0, :] = 0
    cfg = SamplerConfig()
    x = sample_prior(y, g, SCH, cfg, np.random.default_rng(0))
    assert np.array_equal(x[0], y[0])
    assert not np.array_equal(x[1:], y[1:])
    nf = sample_prior(y, g, SCH, SamplerConfig(noise_free=True), np.random.default_rng(0))
    assert np.array_equal(nf, y)
    assert round(prior_std_coeff(SCH, cfg), 4) == 0.2401
    marg = SamplerConfig(prior_std="marginal")
    assert prior_std_coeff(SCH, marg) == pytest.approx(0.5 * np.sqrt(0.999))


def test_prior_variance(grids):
    _, y, g = grids
    tile = lambda a: np.broadcast_to(a, (N, 4, 4)).copy()
    x = sample_prior(tile(y), tile(g), SCH, SamplerConfig(), np.random.default_rng(4))
    c = SCH.reverse_std_coeff(6)
    assert_moments(x, y, c ** 2 * g ** 2)


@pytest.mark.parametrize("mode", ["paper", "exact_posterior"])
def test_reverse_step_terminal(grids, mode):
    x0, y, g = grids
    cfg = SamplerConfig(variance_mode=mode)
    out = reverse_step(y, x0, g, SCH, 1, cfg, np.random.default_rng(0))
    assert np.array_equal(out, x0)


def test_reverse_step_zero_guidance_bins(grids):
    x0, y, g = grids
    g = g.copy()
    g[:, 1] = 0
    out = reverse_step(y, x0, g, SCH, 4, SamplerConfig(), np.random.default_rng(0))
    b = SCH.beta[4]
    expected = (1 - b) * y + b * x0
    assert np.array_equal(out[:, 1], expected[:, 1])
    assert not np.array_equal(out[:, 0], expected[:, 0])


def test_paper_variance_is_not_the_forward_posterior(grids):
    """The default reverse variance differs from the true posterior, so the
    marginal at t-1 is not reproduced (documents the known discrepancy)."""
    x0, y, g = grids
    t = 3
    b = SCH.beta[t]
    paper_var = (1 - b) ** 2 * SCH.kappa ** 2 * SCH.alpha_bar[t] + SCH.reverse_std_coeff(t) ** 2
    marginal_var = SCH.kappa ** 2 * SCH.alpha_bar[t - 1]
    assert paper_var / marginal_var > 1.5
    exact_var = (1 - b) ** 2 * SCH.kappa ** 2 * SCH.alpha_bar[t] + SCH.reverse_std_coeff(t, "exact_posterior") ** 2
    assert exact_var == pytest.approx(marginal_var, rel=1e-12)


def oracle(x0):
    calls = []

    def f(x_t, y, g, t):
        calls.append(t)
        return x0

    f.calls = calls
    return f


def test_run_reverse_oracle_and_budget(grids):
    x0, y, g = grids
    f = oracle(x0)
    out = run_reverse(y, g, f, SCH, SamplerConfig(seed=3))
    assert np.array_equal(out, x0)
    assert f.calls == [6, 5, 4, 3, 2, 1]


def test_run_reverse_reproducible(grids):
    x0, y, g = grids
    den = lambda x, yy, gg, t: 0.5 * x + 0.1 * yy * (1 - gg)
    a = run_reverse(y, g, den, SCH, SamplerConfig(seed=11))
    b = run_reverse(y, g, den, SCH, SamplerConfig(seed=11))
    c = run_reverse(y, g, den, SCH, SamplerConfig(seed=12))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    nf1 = run_reverse(y, g, den, SCH, SamplerConfig(noise_free=True, seed=1))
    nf2 = run_reverse(y, g, den, SCH, SamplerConfig(noise_free=True, seed=2))
    assert np.array_equal(nf1, nf2)


def test_run_reverse_passes_estimated_guidance_in_every_mode(grids):
    x0, y, g = grids
    for mode in ("anisotropic", "isotropic", "none"):
        seen = []
        run_reverse(y, g, lambda x, yy, gg, t: seen.append(gg) or x, SCH, SamplerConfig(mode))
        assert all(np.array_equal(s, g) for s in seen)


def test_run_reverse_contract_errors(grids):
    x0, y, g = grids
    with pytest.raises(ContractError):
        run_reverse(y, g, lambda x, yy, gg, t: x[:2], SCH, SamplerConfig())
    with pytest.raises(NumericalError):
        run_reverse(y, g, lambda x, yy, gg, t: x * np.nan, SCH, SamplerConfig())


def test_trajectory_zero_guidance_bins_get_no_noise(grids):
    x0, y, g = grids
    g = g.copy()
    g[2, :] = 0
    traj, estimates = [], {}

    def den(x, yy, gg, t):
        estimates[t] = 0.7 * x + 0.2 * yy
        return estimates[t]

    run_reverse(y, g, den, SCH, SamplerConfig(seed=5), trajectory=traj)
    assert [s.t for s in traj] == [6, 5, 4, 3, 2, 1, 0]
    assert np.array_equal(traj[0].x[2], y[2])
    for prev, cur in zip(traj, traj[1:]):
        t = prev.t
        b = SCH.beta[t]
        expected = estimates[t] if t == 1 else (1 - b) * prev.x + b * estimates[t]
        assert np.array_equal(cur.x[2], expected[2])
        if t > 1:
            assert not np.array_equal(cur.x[0], expected[0])
