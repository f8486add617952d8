"""Diffusion time-axis coefficients for the directional (prior-targeted) process.

Index convention: arrays are stored with a leading slot for t = 0 so that
``s.alpha_bar[t]`` reads naturally; ``alpha_bar[0] == 1`` and
``beta_sq[0] == 0`` are boundary values, not steps.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class DegenerateStepError(ValueError):
    """A step index at which a quantity is undefined (e.g. t = 1 loss weights)."""


@dataclass(frozen=True)
class Schedule:
    alpha_bar: np.ndarray  # (T+1,), alpha_bar[0] = 1
    lam: np.ndarray  # (T+1,), lam[0] unused (0)

    def __post_init__(self):
        ab = np.asarray(self.alpha_bar, dtype=np.float64)
        lam = np.asarray(self.lam, dtype=np.float64)
        if ab.ndim != 1 or ab.shape != lam.shape or ab.size < 2:
            raise ValueError("alpha_bar and lam must be 1-D of equal length T+1 >= 2")
        if ab[0] != 1.0:
            raise ValueError("alpha_bar[0] must be 1")
        if np.any(ab[1:] <= 0) or np.any(ab[1:] >= 1 + 1e-15):
            raise ValueError("alpha_bar[1:] must lie in (0, 1]")
        if np.any(lam[1:] < 0):
            raise ValueError("noise scales must be non-negative")
        ab.setflags(write=False)
        lam.setflags(write=False)
        object.__setattr__(self, "alpha_bar", ab)
        object.__setattr__(self, "lam", lam)

        alpha = np.ones_like(ab)
        alpha[1:] = ab[1:] / ab[:-1]
        beta_sq = np.zeros_like(ab)
        for t in range(1, ab.size):
            beta_sq[t] = alpha[t] ** 2 * beta_sq[t - 1] + lam[t] ** 2
        sigma_sq = np.zeros_like(ab)
        nz = beta_sq[1:] > 0
        sigma_sq[1:][nz] = lam[1:][nz] ** 2 * beta_sq[:-1][nz] / beta_sq[1:][nz]
        for arr in (alpha, beta_sq, sigma_sq):
            arr.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta_sq", beta_sq)
        object.__setattr__(self, "sigma_sq", sigma_sq)

    @property
    def T(self) -> int:
        return self.alpha_bar.size - 1

    @property
    def beta(self) -> np.ndarray:
        return np.sqrt(self.beta_sq)

    def check_step(self, t: int, lo: int = 1) -> int:
        t = int(t)
        if not lo <= t <= self.T:
            raise ValueError(f"step {t} outside [{lo}, {self.T}]")
        return t

    def beta_sq_direct(self, t: int) -> float:
        """beta_t^2 as the explicit sum over k of (abar_t / abar_k)^2 lam_k^2."""
        t = self.check_step(t)
        k = np.arange(1, t + 1)
        return float(np.sum(self.alpha_bar[t] ** 2 * self.lam[k] ** 2 / self.alpha_bar[k] ** 2))

    def to_json(self) -> str:
        return json.dumps(
            {
                "T": self.T,
                "alpha_bar": [float(x) for x in self.alpha_bar[1:]],
                "lambda": [float(x) for x in self.lam[1:]],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Schedule":
        doc = json.loads(text)
        ab = np.asarray(doc["alpha_bar"], dtype=np.float64)
        lam = np.asarray(doc["lambda"], dtype=np.float64)
        if ab.size != int(doc["T"]) or lam.size != ab.size:
            raise ValueError("schedule JSON: array lengths disagree with T")
        return from_arrays(ab, lam)


def from_arrays(alpha_bar, lam) -> Schedule:
    """Build a schedule from per-step arrays indexed t = 1..T."""
    ab = np.concatenate([[1.0], np.asarray(alpha_bar, dtype=np.float64)])
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), ab[1:].shape)
    return Schedule(ab, np.concatenate([[0.0], lam]))


def build_schedule(T: int = 20, alpha_bar_near_data: float = 0.99,
                   alpha_bar_near_prior: float = 0.01, lambda_const: float = 0.1) -> Schedule:
    """Linear alpha_bar from ``alpha_bar_near_data`` at t=1 to ``alpha_bar_near_prior`` at t=T.

    With the defaults alpha_bar decreases in t, so the closed-form marginal at
    t = T sits on the radar prior. Swap the endpoints for the opposite indexing.
    """
    if int(T) != T or T < 1:
        raise ValueError(f"T must be a positive integer, got {T}")
    for name, v in (("alpha_bar_near_data", alpha_bar_near_data),
                    ("alpha_bar_near_prior", alpha_bar_near_prior)):
        if not 0.0 < v < 1.0:
            raise ValueError(f"{name} must lie in (0, 1), got {v}")
    if not lambda_const > 0:
        raise ValueError(f"lambda_const must be positive, got {lambda_const}")
    if T == 1:
        ab = np.array([alpha_bar_near_data], dtype=np.float64)
    else:
        ab = np.linspace(alpha_bar_near_data, alpha_bar_near_prior, int(T))
    return from_arrays(ab, np.full(int(T), float(lambda_const)))


def _weight_terms(s: Schedule, t: int):
    t = s.check_step(t)
    if s.beta_sq[t - 1] <= 0:
        raise DegenerateStepError(f"loss weight undefined at t={t}: beta_{t - 1}^2 = 0")
    return t


def spatial_loss_weight(s: Schedule, t: int) -> float:
    """lam_t^2 / (2 alpha_t^2 beta_{t-1}^2)."""
    t = _weight_terms(s, t)
    return float(s.lam[t] ** 2 / (2.0 * s.alpha[t] ** 2 * s.beta_sq[t - 1]))


def doppler_loss_weight(s: Schedule, t: int) -> float:
    """lam_t^2 abar_{t-1}^2 / (2 beta_t^2 beta_{t-1}^2)."""
    t = _weight_terms(s, t)
    return float(s.lam[t] ** 2 * s.alpha_bar[t - 1] ** 2
                 / (2.0 * s.beta_sq[t] * s.beta_sq[t - 1]))
