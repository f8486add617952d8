"""Analytic denoiser and the refine-then-estimate pipeline.

``ShrinkageDenoiser`` stands in for a trained noise predictor: it forms an x0
estimate from the radar prior by (1) gating cells whose Doppler disagrees
with the current ego-velocity estimate and (2) soft-thresholding low
occupancy, then returns the noise that maps that estimate to x_t. The ego
estimate itself is refined at every step from a soft mask of x_t, so
occupancy and velocity improve together along the chain.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cube import DEFAULT_VALIDITY_FLOOR, Sddr
from .diffusion import eps_from_x0, oracle_denoiser, sample
from .eve import (DEFAULT_ITERATIONS, DEFAULT_THRESHOLD, DegenerateGeometryError,
                  bearing_profile, eve_ransac, observations_from_sddr, soft_mask,
                  wls_from_mask)
from .radar import direction
from .schedule import Schedule


def doppler_residual(sddr: Sddr, ego) -> np.ndarray:
    """|v - d . v_ego| per cell; +inf where the SDDR has no valid Doppler."""
    az, el, _ = sddr.cfg.angle_grid()
    pred = direction(az, el) @ np.asarray(ego, dtype=float)
    return np.where(sddr.valid, np.abs(sddr.v - pred[None]), np.inf)


def shrink(u: np.ndarray, floor: float) -> np.ndarray:
    return np.clip((u - floor) / (1.0 - floor), 0.0, None)


@dataclass
class ShrinkageDenoiser:
    schedule: Schedule
    threshold: float = DEFAULT_THRESHOLD
    floor: float = DEFAULT_VALIDITY_FLOOR
    temperature: float = 1.0
    ransac_iterations: int = DEFAULT_ITERATIONS
    seed: int = 0
    ego_history: list = field(default_factory=list)

    def x0_estimate(self, u0: np.ndarray, sddr: Sddr, ego) -> np.ndarray:
        keep = doppler_residual(sddr, ego) <= self.threshold
        x = shrink(np.where(keep, u0, 0.0), self.floor)
        top = x.max() if x.size else 0.0
        return x / top if top > 0 else x

    def _refine_ego(self, x_t: np.ndarray, sddr: Sddr, ego) -> np.ndarray:
        gate = doppler_residual(sddr, ego) <= self.threshold
        occ = np.where(gate, np.clip(x_t, 0.0, None), 0.0)
        prof = bearing_profile(sddr, occ, self.floor)
        try:
            return wls_from_mask(soft_mask(occ, self.temperature, prof.valid), prof)
        except DegenerateGeometryError:
            return ego

    def x0(self, x_t, u0, v: Sddr, t: int) -> np.ndarray:
        """Clean-occupancy estimate for step t; also advances the ego estimate."""
        if not self.ego_history:
            self.ego_history.append(eve_ransac(observations_from_sddr(v), self.threshold,
                                               self.ransac_iterations, self.seed).velocity)
        ego = self._refine_ego(np.asarray(x_t, float), v, self.ego_history[-1])
        self.ego_history.append(ego)
        return self.x0_estimate(np.asarray(u0, float), v, ego)

    def __call__(self, x_t, u0, v: Sddr, t: int):
        return eps_from_x0(x_t, self.x0(x_t, u0, v, t), u0, t, self.schedule)


def mask_eve(sddr: Sddr, occupancy=None, temperature: float = 1.0,
             floor: float = DEFAULT_VALIDITY_FLOOR) -> np.ndarray:
    """WLS ego velocity with soft-mask weights from an occupancy volume."""
    occ = sddr.u if occupancy is None else np.asarray(occupancy, dtype=float)
    prof = bearing_profile(sddr, occ, floor)
    return wls_from_mask(soft_mask(occ, temperature, prof.valid), prof)


@dataclass
class RefineResult:
    occupancy: np.ndarray
    ego_history: list


def refine(sddr: Sddr, schedule: Schedule, rng_seed: int, denoiser: str = "shrinkage",
           truth: Optional[np.ndarray] = None, **kwargs) -> RefineResult:
    """Run the reverse chain from the SDDR occupancy prior."""
    if denoiser == "oracle":
        if truth is None:
            raise ValueError("the oracle denoiser needs a truth occupancy")
        den = oracle_denoiser(truth, schedule)
        history = []
    elif denoiser == "shrinkage":
        den = ShrinkageDenoiser(schedule, seed=rng_seed, **kwargs)
        history = den.ego_history
    else:
        raise ValueError(f"unknown denoiser {denoiser!r}")
    out = sample(sddr.u, sddr, schedule, den, rng_seed)
    return RefineResult(out, history)


LOSS_BALANCE = 0.01


def step_loss(eps, eps_hat, mask, profile, v_true, t: int, s: Schedule,
              omega: float = LOSS_BALANCE) -> dict:
    """Per-step spatial and Doppler-consistency losses and their weighted sum."""
    from .eve import doppler_consistency_loss
    from .schedule import spatial_loss_weight

    diff = np.asarray(eps, float) - np.asarray(eps_hat, float)
    spatial = spatial_loss_weight(s, t) * float(np.sum(diff * diff))
    doppler = doppler_consistency_loss(mask, profile, v_true, t, s)
    return {"spatial": spatial, "doppler": doppler, "total": spatial + omega * doppler}
