import math

import numpy as np
import pytest

from crystalbfn import continuous as cts


def test_beta_gamma_at_zero():
    assert cts.beta(0.0, 0.02) == 0.0
    assert cts.gamma(0.0, 0.02) == 0.0


def test_beta_endpoint_and_midpoint():
    # direct evaluation of sigma^(-2t) - 1
    assert cts.beta(1.0, 0.02) == pytest.approx(0.02 ** -2 - 1.0, rel=1e-12)
    assert cts.beta(1.0, 0.02) == pytest.approx(2499.0, rel=1e-12)
    assert cts.beta(0.5, 0.02) == pytest.approx(1.0 / 0.02 - 1.0, rel=1e-12)
    assert cts.gamma(1.0, 0.02) == pytest.approx(1.0 - 4e-4, rel=1e-12)


def test_beta_monotone_and_gamma_range():
    ts = np.linspace(0, 1, 101)
    betas = [cts.beta(t, 0.02) for t in ts]
    gammas = [cts.gamma(t, 0.02) for t in ts]
    assert all(b2 > b1 for b1, b2 in zip(betas, betas[1:]))
    assert all(g2 > g1 for g1, g2 in zip(gammas, gammas[1:]))
    assert 0.0 <= min(gammas) and max(gammas) <= 1.0 - 0.02 ** 2


def test_time_domain_rejected():
    for bad in (-0.1, 1.1):
        with pytest.raises(ValueError):
            cts.beta(bad, 0.02)


def test_bayes_update_example():
    state = cts.ContinuousState(np.zeros(1), 1.0)
    new = cts.bayes_update(state, np.ones(1), 1.0)
    assert new.precision == 2.0
    assert new.mean[0] == pytest.approx(0.5)


def test_bayes_update_vanishing_alpha_limit():
    state = cts.ContinuousState(np.array([0.3, -0.7]), 2.5)
    new = cts.bayes_update(state, np.array([5.0, 5.0]), 1e-14)
    assert np.allclose(new.mean, state.mean, atol=1e-12)


def test_bayes_update_merges_like_single_update():
    # two updates with the same y equal one update with summed accuracy
    rng = np.random.default_rng(0)
    y = rng.normal(size=4)
    state = cts.ContinuousState(rng.normal(size=4), 1.0)
    a1, a2 = 0.7, 1.9
    two = cts.bayes_update(cts.bayes_update(state, y, a1), y, a2)
    one = cts.bayes_update(state, y, a1 + a2)
    assert two.precision == pytest.approx(one.precision, rel=1e-14)
    assert np.allclose(two.mean, one.mean, atol=1e-12)


def test_bayes_update_shape_mismatch():
    state = cts.ContinuousState(np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        cts.bayes_update(state, np.zeros(4), 1.0)


def test_precision_bookkeeping_exact():
    rng = np.random.default_rng(1)
    state = cts.ContinuousState(np.zeros(2), 1.0)
    alphas = rng.uniform(0.1, 3.0, size=20)
    running = 1.0
    for a in alphas:
        state = cts.bayes_update(state, rng.normal(size=2), a)
        running += a
    assert state.precision == running


def test_flow_sample_at_zero_is_prior():
    rng = np.random.default_rng(2)
    state, eps = cts.flow_sample(np.array([3.0, -1.0]), 0.0, 0.02, rng)
    assert np.all(state.mean == 0.0)
    assert state.precision == 1.0


def test_flow_sample_moments():
    rng = np.random.default_rng(3)
    x = 0.7
    n = 100_000
    state, _ = cts.flow_sample(np.full(n, x), 1.0, 0.02, rng)
    g = cts.gamma(1.0, 0.02)
    se_mean = math.sqrt(g * (1 - g) / n)
    assert abs(state.mean.mean() - g * x) < 3 * se_mean
    var = state.mean.var(ddof=1)
    se_var = g * (1 - g) * math.sqrt(2.0 / (n - 1))
    assert abs(var - g * (1 - g)) < 3 * se_var


def test_flow_sample_variance_mid_time():
    rng = np.random.default_rng(4)
    n = 100_000
    state, _ = cts.flow_sample(np.full(n, -0.4), 0.37, 0.02, rng)
    g = cts.gamma(0.37, 0.02)
    var = state.mean.var(ddof=1)
    se_var = g * (1 - g) * math.sqrt(2.0 / (n - 1))
    assert abs(var - g * (1 - g)) < 3 * se_var


def test_output_estimate_zero_noise():
    mu = np.array([0.2, 0.4])
    t = 0.6
    assert np.allclose(cts.output_estimate(mu, t, 0.02, np.zeros(2)),
                       mu / cts.gamma(t, 0.02))


def test_output_estimate_wraps_coordinates():
    x_hat = cts.output_estimate(np.array([1.25 * cts.gamma(0.5, 0.02)]), 0.5, 0.02,
                                np.zeros(1), wrap=True)
    assert x_hat[0] == pytest.approx(0.25)


def test_output_estimate_inverts_flow_noise():
    rng = np.random.default_rng(5)
    x = rng.normal(size=6)
    for t in (0.05, 0.3, 0.9):
        state, eps = cts.flow_sample(x, t, 0.02, rng)
        rec = cts.output_estimate(state.mean, t, 0.02, eps)
        assert np.allclose(rec, x, atol=1e-12)


def test_output_estimate_near_singular_time():
    with pytest.raises(cts.NearSingularTime):
        cts.output_estimate(np.zeros(1), cts.T_MIN, 0.02, np.zeros(1))
    with pytest.raises(cts.NearSingularTime):
        cts.output_estimate(np.zeros(1), 0.0, 0.02, np.zeros(1))


def test_loss_zero_iff_exact():
    x = np.array([0.1, 0.9])
    assert cts.loss(x, x, 0.5, 0.02) == 0.0
    assert cts.loss(x, x + 1e-3, 0.5, 0.02) > 0.0


def test_loss_values():
    # unit squared residual, direct evaluation of -ln(sigma) / sigma^(2t)
    x = np.array([0.0])
    x_hat = np.array([1.0])
    assert cts.loss(x, x_hat, 0.0, 0.02) == pytest.approx(-math.log(0.02), rel=1e-12)
    assert cts.loss(x, x_hat, 1.0, 0.02) == pytest.approx(-math.log(0.02) / 0.02 ** 2, rel=1e-12)


def test_flow_matches_stepwise_updates():
    # 200 sharpening steps against the one-shot flow distribution
    rng = np.random.default_rng(6)
    sigma, x, t_final, n_steps, trials = 0.02, 0.31, 0.5, 200, 20_000
    state = cts.ContinuousState(np.zeros(trials), 1.0)
    betas = [cts.beta(i * t_final / n_steps, sigma) for i in range(n_steps + 1)]
    for i in range(n_steps):
        alpha = betas[i + 1] - betas[i]
        y = cts.sender_sample(np.full(trials, x), alpha, rng)
        state = cts.bayes_update(state, y, alpha)
    g = cts.gamma(t_final, sigma)
    se_mean = math.sqrt(g * (1 - g) / trials)
    assert abs(state.mean.mean() - g * x) < 3 * se_mean
    se_var = g * (1 - g) * math.sqrt(2.0 / (trials - 1))
    assert abs(state.mean.var(ddof=1) - g * (1 - g)) < 3 * se_var
    assert state.precision == pytest.approx(1.0 + betas[-1], rel=1e-12)


def test_loss_periodic_residual():
    # boundary atom: wrapped estimate lands at 1 - eps, plain residual ~1
    x = np.array([0.0])
    x_hat = np.array([1.0 - 1e-15])
    assert cts.loss(x, x_hat, 0.5, 0.02) > 1.0
    assert cts.loss(x, x_hat, 0.5, 0.02, periodic=True) < 1e-20
    # away from the boundary the two forms agree
    x = np.array([0.4])
    x_hat = np.array([0.45])
    assert cts.loss(x, x_hat, 0.5, 0.02, periodic=True) == pytest.approx(
        cts.loss(x, x_hat, 0.5, 0.02))
