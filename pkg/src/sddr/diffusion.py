"""Directional diffusion: forward process toward the radar prior, tractable
posterior, and the reverse sampling chain.

Volumes are plain float64 ndarrays; every operation broadcasts cell-wise and
works equally on scalars. Randomness is always passed in (noise arrays or a
seed), never drawn from module state.
"""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .schedule import DegenerateStepError, Schedule

Denoiser = Callable[..., np.ndarray]
"""A denoiser maps (x_t, u0, v, t) to a noise estimate. It may also expose an
``x0(x_t, u0, v, t)`` method; the chain uses it only on noiseless steps
(beta_t = 0), where a noise estimate carries no information about x0."""

ILL_CONDITIONED_ALPHA_BAR = 1e-12


class IllConditionedStepError(ValueError):
    pass


def _same_dims(*arrays):
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) > 1:
        raise ValueError(f"dimension mismatch: {sorted(shapes)}")


def forward_step(x_prev, u0, t: int, s: Schedule, noise):
    """x_t = alpha_t x_{t-1} + (1 - alpha_t) u0 + lam_t noise."""
    _same_dims(x_prev, u0, noise)
    t = s.check_step(t)
    a = s.alpha[t]
    return a * np.asarray(x_prev, float) + (1.0 - a) * np.asarray(u0, float) + s.lam[t] * np.asarray(noise, float)


def forward_marginal(x0, u0, t: int, s: Schedule, noise):
    """Sample q(x_t | x0, u0) in one shot with the supplied standard-normal noise."""
    _same_dims(x0, u0, noise)
    t = s.check_step(t)
    ab = s.alpha_bar[t]
    return ab * np.asarray(x0, float) + (1.0 - ab) * np.asarray(u0, float) + np.sqrt(s.beta_sq[t]) * np.asarray(noise, float)


def posterior_coefficients(t: int, s: Schedule):
    """Weights (c_xt, c_u0, c_x0) of the posterior mean, and the posterior variance."""
    t = s.check_step(t)
    if t < 2:
        raise DegenerateStepError("posterior at t=1 collapses onto x0")
    a, lam2 = s.alpha[t], s.lam[t] ** 2
    b2, b2_prev, ab_prev = s.beta_sq[t], s.beta_sq[t - 1], s.alpha_bar[t - 1]
    if b2 <= 0:
        # noiseless chain: x_{t-1} is fixed by x0 and u0
        return 0.0, 1.0 - ab_prev, ab_prev, 0.0
    c_xt = a * b2_prev / b2
    c_x0 = lam2 * ab_prev / b2
    c_u0 = (b2 - a * b2_prev - lam2 * ab_prev) / b2
    return c_xt, c_u0, c_x0, lam2 * b2_prev / b2


def posterior_params(x_t, x0, u0, t: int, s: Schedule):
    _same_dims(x_t, x0, u0)
    c_xt, c_u0, c_x0, var = posterior_coefficients(t, s)
    mean = c_xt * np.asarray(x_t, float) + c_u0 * np.asarray(u0, float) + c_x0 * np.asarray(x0, float)
    return mean, var


def predict_x0(x_t, u0, t: int, s: Schedule, eps_hat):
    """Invert the closed-form marginal for x0 given a noise estimate."""
    _same_dims(x_t, u0, eps_hat)
    t = s.check_step(t)
    ab = s.alpha_bar[t]
    if ab < ILL_CONDITIONED_ALPHA_BAR:
        raise IllConditionedStepError(f"alpha_bar_{t} = {ab:g} too small to invert")
    return (np.asarray(x_t, float) - (1.0 - ab) * np.asarray(u0, float)
            - np.sqrt(s.beta_sq[t]) * np.asarray(eps_hat, float)) / ab


def eps_from_x0(x_t, x0, u0, t: int, s: Schedule):
    """The noise that makes forward_marginal(x0) equal x_t (zero when beta_t = 0)."""
    t = s.check_step(t)
    ab = s.alpha_bar[t]
    beta = np.sqrt(s.beta_sq[t])
    resid = np.asarray(x_t, float) - ab * np.asarray(x0, float) - (1.0 - ab) * np.asarray(u0, float)
    if beta == 0:
        return np.zeros_like(resid)
    return resid / beta


def eps_parameterized_mean(x_t, u0, t: int, s: Schedule, eps_hat):
    """Posterior mean written directly in the noise estimate.

    The coefficient on ``eps_hat`` is -lam_t^2 / (alpha_t beta_t); the sign
    follows from substituting the marginal into the posterior mean.
    """
    _same_dims(x_t, u0, eps_hat)
    t = s.check_step(t)
    if t < 2:
        raise DegenerateStepError("posterior at t=1 collapses onto x0")
    a = s.alpha[t]
    return (np.asarray(x_t, float) / a + (a - 1.0) / a * np.asarray(u0, float)
            - s.lam[t] ** 2 / (a * np.sqrt(s.beta_sq[t])) * np.asarray(eps_hat, float))


def reverse_step(x_t, u0, v, t: int, s: Schedule, denoiser: Denoiser, noise=None):
    """One ancestral step x_t -> x_{t-1} through the x0-substitution route."""
    t = s.check_step(t)
    direct = s.beta_sq[t] == 0 and hasattr(denoiser, "x0")
    out = np.asarray(denoiser.x0(x_t, u0, v, t) if direct else denoiser(x_t, u0, v, t), dtype=float)
    if out.shape != np.shape(x_t):
        raise ValueError(f"denoiser returned shape {out.shape}, expected {np.shape(x_t)}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"denoiser returned non-finite values at t={t}")
    x0_hat = out if direct else predict_x0(x_t, u0, t, s, out)
    if t == 1:
        return x0_hat
    mean, var = posterior_params(x_t, x0_hat, u0, t, s)
    if noise is None:
        raise ValueError("noise is required for t >= 2")
    _same_dims(x_t, noise)
    return mean + np.sqrt(var) * np.asarray(noise, float)


def sample(u0, v, s: Schedule, denoiser: Denoiser, rng_seed: int, trace: Optional[list] = None):
    """Run the chain from x_T (drawn around the prior) down to a clamped x0 estimate."""
    if rng_seed is None:
        raise ValueError("rng_seed is required")
    rng = np.random.default_rng(int(rng_seed))
    u0 = np.asarray(u0, dtype=float)
    T = s.T
    x = s.alpha_bar[T] * u0 + (1.0 - s.alpha_bar[T]) * u0 + np.sqrt(s.beta_sq[T]) * rng.standard_normal(u0.shape)
    for t in range(T, 0, -1):
        noise = rng.standard_normal(u0.shape) if t >= 2 else None
        x = reverse_step(x, u0, v, t, s, denoiser, noise)
        if trace is not None:
            trace.append(x)
    return np.clip(x, 0.0, 1.0)


class _Oracle:
    def __init__(self, x0, s: Schedule):
        self.truth = np.asarray(x0, dtype=float)
        self.schedule = s

    def __call__(self, x_t, u0, v, t):
        return eps_from_x0(x_t, self.truth, u0, t, self.schedule)

    def x0(self, x_t, u0, v, t):
        return self.truth.copy()


def oracle_denoiser(x0, s: Schedule) -> Denoiser:
    """Denoiser that returns the exact noise consistent with a known x0."""
    return _Oracle(x0, s)
