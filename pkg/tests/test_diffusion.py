import numpy as np
import pytest

from sddr.diffusion import (IllConditionedStepError, eps_from_x0, eps_parameterized_mean,
                            forward_marginal, forward_step, oracle_denoiser, posterior_coefficients,
                            posterior_params, predict_x0, reverse_step, sample)
from sddr.schedule import DegenerateStepError, build_schedule, from_arrays


def gaussian_bayes_posterior(prior_mean, prior_var, a, b, lik_var, x_obs):
    """Posterior of z given x_obs ~ N(a z + b, lik_var), z ~ N(prior_mean, prior_var)."""
    prec = 1.0 / prior_var + a * a / lik_var
    mean = (prior_mean / prior_var + a * (x_obs - b) / lik_var) / prec
    return mean, 1.0 / prec


# -- forward ------------------------------------------------------------------------

def test_forward_step_identity():
    s = from_arrays([1.0 - 1e-16, 0.5], 0.0)
    x = np.array([0.2, 0.7])
    assert np.allclose(forward_step(x, np.array([5.0, -3.0]), 1, s, np.ones(2)), x)


def test_forward_step_fixed_point_at_prior():
    s = from_arrays([0.9, 0.4], 0.0)
    u0 = np.array([0.3, 0.8])
    assert np.allclose(forward_step(u0, u0, 2, s, np.ones(2)), u0)


def test_forward_step_scalar():
    s = from_arrays([0.8], 0.1)
    assert forward_step(1.0, 0.0, 1, s, 0.5) == pytest.approx(0.85, abs=1e-15)


def test_forward_step_dimension_mismatch():
    s = build_schedule()
    with pytest.raises(ValueError):
        forward_step(np.zeros(3), np.zeros(4), 1, s, np.zeros(3))


def test_marginal_constant_field():
    s = from_arrays(np.linspace(0.9, 0.1, 5), 0.0)
    u0 = np.full((2, 3), 0.4)
    for t in range(1, 6):
        assert np.allclose(forward_marginal(u0, u0, t, s, np.ones((2, 3))), u0)


def test_marginal_prior_concentration():
    s = from_arrays([0.5, 1e-12], 0.1)
    assert forward_marginal(1.0, 0.3, 2, s, 0.0) == pytest.approx(0.3, abs=1e-11)


def test_marginal_matches_chained_steps_monte_carlo():
    rng = np.random.default_rng(7)
    s = from_arrays(np.sort(rng.uniform(0.05, 0.95, 5))[::-1], rng.uniform(0.05, 0.5, 5))
    n = 100_000
    x = np.ones(n)
    for t in range(1, 6):
        x = forward_step(x, np.zeros(n), t, s, rng.standard_normal(n))
    y = forward_marginal(np.ones(n), np.zeros(n), 5, s, rng.standard_normal(n))
    se = np.sqrt(x.var() / n + y.var() / n)
    assert abs(x.mean() - y.mean()) < 3 * se
    assert 0.97 <= x.var() / y.var() <= 1.03


# -- posterior -------------------------------------------------------------------------

def test_posterior_constant_field():
    s = build_schedule()
    for t in range(2, 21):
        mean, _ = posterior_params(0.6, 0.6, 0.6, t, s)
        assert mean == pytest.approx(0.6, abs=1e-13)


def test_posterior_matches_gaussian_bayes():
    s = from_arrays([0.9, 0.5], 0.1)
    x_t, x0, u0 = 0.4, 1.0, 0.0
    mean, var = posterior_params(x_t, x0, u0, 2, s)
    a2 = 0.5 / 0.9
    ref_mean, ref_var = gaussian_bayes_posterior(0.9 * x0 + 0.1 * u0, 0.01, a2, (1 - a2) * u0, 0.01, x_t)
    assert mean == pytest.approx(ref_mean, rel=1e-12)
    assert var == pytest.approx(ref_var, rel=1e-12)
    c_xt, c_u0, c_x0, _ = posterior_coefficients(2, s)
    b2 = a2 ** 2 * 0.01 + 0.01
    assert c_xt == pytest.approx(a2 * 0.01 / b2, rel=1e-14)
    assert c_x0 == pytest.approx(0.01 * 0.9 / b2, rel=1e-14)
    assert c_u0 == pytest.approx(1 - c_xt - c_x0, abs=1e-15)


def test_posterior_random_against_bayes(rng):
    for _ in range(50):
        T = int(rng.integers(2, 30))
        s = from_arrays(np.sort(rng.uniform(0.01, 0.99, T))[::-1], rng.uniform(0.01, 1.0, T))
        t = int(rng.integers(2, T + 1))
        x_t, x0, u0 = rng.normal(size=3)
        mean, var = posterior_params(x_t, x0, u0, t, s)
        pm = s.alpha_bar[t - 1] * x0 + (1 - s.alpha_bar[t - 1]) * u0
        ref = gaussian_bayes_posterior(pm, s.beta_sq[t - 1], s.alpha[t], (1 - s.alpha[t]) * u0,
                                       s.lam[t] ** 2, x_t)
        assert mean == pytest.approx(ref[0], rel=1e-9, abs=1e-12)
        assert var == pytest.approx(ref[1], rel=1e-9)


def test_posterior_t1_degenerate():
    with pytest.raises(DegenerateStepError):
        posterior_params(0.0, 0.0, 0.0, 1, build_schedule())


def test_coefficients_sum_to_one():
    s = build_schedule()
    for t in range(2, 21):
        c = posterior_coefficients(t, s)
        assert abs(c[0] + c[1] + c[2] - 1.0) <= 1e-12


# -- predict_x0 / reverse ------------------------------------------------------------------

def test_predict_x0_round_trip(rng):
    s = build_schedule()
    x0, u0, eps = rng.random((3, 4, 5, 2))
    for t in (1, 7, 20):
        x_t = forward_marginal(x0, u0, t, s, eps)
        assert np.allclose(predict_x0(x_t, u0, t, s, eps), x0, atol=1e-10)
        assert np.allclose(predict_x0(s.alpha_bar[t] * x0 + (1 - s.alpha_bar[t]) * u0, u0, t, s,
                                      np.zeros_like(x0)), x0, atol=1e-12)


def test_predict_x0_scalar():
    s = from_arrays([0.8], 0.1)
    assert predict_x0(0.85, 0.0, 1, s, 0.5) == pytest.approx(1.0, abs=1e-14)


def test_predict_x0_ill_conditioned():
    s = from_arrays([0.5, 1e-13], 0.1)
    with pytest.raises(IllConditionedStepError):
        predict_x0(0.1, 0.1, 2, s, 0.0)


def test_eps_route_matches_substitution(rng):
    for _ in range(200):
        T = int(rng.integers(2, 25))
        s = from_arrays(np.sort(rng.uniform(0.01, 0.99, T))[::-1], rng.uniform(0.01, 0.5, T))
        t = int(rng.integers(2, T + 1))
        x_t, u0, eps = rng.normal(size=3)
        m1 = eps_parameterized_mean(x_t, u0, t, s, eps)
        m2, _ = posterior_params(x_t, predict_x0(x_t, u0, t, s, eps), u0, t, s)
        assert m1 == pytest.approx(m2, abs=1e-10)


def test_positive_sign_would_disagree():
    s = build_schedule()
    x_t, u0, eps = 0.3, 0.6, 1.0
    m_sub, _ = posterior_params(x_t, predict_x0(x_t, u0, 5, s, eps), u0, 5, s)
    flipped = eps_parameterized_mean(x_t, u0, 5, s, -eps)  # i.e. "+" coefficient on eps
    assert abs(flipped - m_sub) > 1e-3


def test_reverse_step_oracle_equals_true_posterior(rng):
    s = build_schedule()
    x0, u0 = rng.random((2, 6))
    for t in range(2, 21):
        x_t = forward_marginal(x0, u0, t, s, rng.standard_normal(6))
        z = rng.standard_normal(6)
        out = reverse_step(x_t, u0, None, t, s, oracle_denoiser(x0, s), z)
        mean, var = posterior_params(x_t, x0, u0, t, s)
        assert np.allclose(out, mean + np.sqrt(var) * z, atol=1e-10)


def test_reverse_step_noiseless_inverts_forward(rng):
    s = from_arrays(np.linspace(0.95, 0.05, 10), 0.0)
    x0, u0 = rng.random((2, 5))
    x = x0
    chain = [x0]
    for t in range(1, 11):
        x = forward_step(x, u0, t, s, np.zeros(5))
        chain.append(x)
    den = oracle_denoiser(x0, s)
    for t in range(10, 1, -1):
        back = reverse_step(chain[t], u0, None, t, s, den, np.zeros(5))
        assert np.allclose(back, chain[t - 1], atol=1e-12)


def test_reverse_step_scalar_chain():
    # posterior example composed with the predict_x0 oracle
    s = from_arrays([0.9, 0.5], 0.1)
    x0, u0, x_t = 1.0, 0.0, 0.4
    eps = (x_t - 0.5 * x0) / np.sqrt(s.beta_sq[2])
    out = reverse_step(x_t, u0, None, 2, s, lambda *a: eps, 0.0)
    a2 = 0.5 / 0.9
    ref, _ = gaussian_bayes_posterior(0.9, 0.01, a2, 0.0, 0.01, x_t)
    assert out == pytest.approx(ref, rel=1e-12)


def test_reverse_step_rejects_bad_denoiser():
    s = build_schedule()
    with pytest.raises(ValueError):
        reverse_step(np.zeros(3), np.zeros(3), None, 5, s, lambda *a: np.zeros(4), np.zeros(3))
    with pytest.raises(ValueError):
        reverse_step(np.zeros(3), np.zeros(3), None, 5, s, lambda *a: np.full(3, np.nan), np.zeros(3))


def test_sample_oracle_recovers_x0(rng):
    s = build_schedule()
    x0 = rng.random((8, 4, 2))
    u0 = np.clip(x0 + 0.3 * rng.standard_normal(x0.shape), 0, 1)
    out = sample(u0, None, s, oracle_denoiser(x0, s), rng_seed=3)
    assert np.max(np.abs(out - x0)) <= 5 * np.sqrt(s.sigma_sq.max())
    s0 = from_arrays(np.linspace(0.99, 0.01, 20), 0.0)
    assert np.array_equal(sample(u0, None, s0, oracle_denoiser(x0, s0), 3), x0)


def test_sample_single_step_is_posterior_mean(rng):
    s = from_arrays([0.6], 0.1)
    x0, u0 = rng.random((2, 5))
    got = sample(u0, None, s, oracle_denoiser(x0, s), rng_seed=1)
    assert np.allclose(got, x0, atol=1e-12)


def test_sample_deterministic(rng):
    s = build_schedule()
    u0 = rng.random((4, 4, 2))
    den = lambda x_t, u, v, t: np.full_like(x_t, 0.1)
    a = sample(u0, None, s, den, 11)
    b = sample(u0, None, s, den, 11)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, sample(u0, None, s, den, 12))


def test_sample_requires_seed():
    with pytest.raises(ValueError):
        sample(np.zeros(2), None, build_schedule(), lambda *a: np.zeros(2), None)
