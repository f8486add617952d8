"""Ego-velocity estimation from Doppler geometry.

A static point seen along unit direction d(a, e) has radial (closing) speed
d . v_ego, which is linear in v_ego. Weighted least squares is therefore the
exact estimator; RANSAC wraps it for ghost-contaminated data, and the soft
mask turns an occupancy volume into per-bearing WLS weights.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .radar import RadarConfig, direction
from .schedule import Schedule, doppler_loss_weight

DEFAULT_THRESHOLD = 0.08
DEFAULT_ITERATIONS = 200
SPEED_CAP = 20.0
RANK_TOL = 1e-9


class DegenerateGeometryError(ValueError):
    pass


class ConsensusError(ValueError):
    pass


@dataclass
class DopplerObservations:
    azimuth: np.ndarray
    elevation: np.ndarray
    radial_velocity: np.ndarray
    weight: np.ndarray = None

    def __post_init__(self):
        self.azimuth = np.atleast_1d(np.asarray(self.azimuth, dtype=float))
        self.elevation = np.atleast_1d(np.asarray(self.elevation, dtype=float))
        self.radial_velocity = np.atleast_1d(np.asarray(self.radial_velocity, dtype=float))
        if self.weight is None:
            self.weight = np.ones_like(self.azimuth)
        self.weight = np.atleast_1d(np.asarray(self.weight, dtype=float))
        n = {self.azimuth.size, self.elevation.size, self.radial_velocity.size, self.weight.size}
        if len(n) != 1:
            raise ValueError("observation arrays must have equal length")
        if np.any(self.weight < 0) or not np.all(np.isfinite(self.weight)):
            raise ValueError("weights must be finite and non-negative")

    def __len__(self):
        return self.azimuth.size

    def design(self) -> np.ndarray:
        return direction(self.azimuth, self.elevation)

    def subset(self, mask) -> "DopplerObservations":
        return DopplerObservations(self.azimuth[mask], self.elevation[mask],
                                   self.radial_velocity[mask], self.weight[mask])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["a", "e", "v_r", "w"])
        for row in zip(self.azimuth, self.elevation, self.radial_velocity, self.weight):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DopplerObservations":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0][:3]] != ["a", "e", "v_r"]:
            raise ValueError("observations CSV must start with header a,e,v_r[,w]")
        has_w = len(rows[0]) > 3
        cols = [[], [], [], []]
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            try:
                vals = [float(x) for x in row]
            except ValueError:
                raise ValueError(f"line {lineno}: non-numeric field in {row}") from None
            if len(vals) != (4 if has_w else 3):
                raise ValueError(f"line {lineno}: expected {4 if has_w else 3} fields, got {len(vals)}")
            for c, x in zip(cols, vals + ([] if has_w else [1.0])):
                c.append(x)
        return cls(*[np.array(c) for c in cols])


def radial_velocity(a, e, v) -> np.ndarray | float:
    out = direction(a, e) @ np.asarray(v, dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def _weighted_system(obs: DopplerObservations):
    keep = obs.weight > 0
    D = obs.design()[keep]
    sw = np.sqrt(obs.weight[keep])
    return D * sw[:, None], obs.radial_velocity[keep] * sw


def eve_wls(obs: DopplerObservations) -> np.ndarray:
    """Weighted least-squares ego velocity; raises on rank-deficient bearings."""
    A, b = _weighted_system(obs)
    if A.shape[0] < 3:
        raise DegenerateGeometryError(f"need >= 3 weighted observations, got {A.shape[0]}")
    _, s, vt = np.linalg.svd(A, full_matrices=False)
    deficient = s < RANK_TOL * max(s[0], 1e-300)
    if deficient.any():
        dirs = "; ".join(np.array2string(vt[i], precision=3) for i in np.flatnonzero(deficient))
        raise DegenerateGeometryError(
            f"bearing geometry has rank {int((~deficient).sum())} < 3; unobservable direction(s): {dirs}")
    v, *_ = np.linalg.lstsq(A, b, rcond=None)
    return v


@dataclass
class RansacResult:
    velocity: np.ndarray
    inliers: np.ndarray
    inlier_rate: float
    hypotheses: int = 0

    def to_dict(self) -> dict:
        return {
            "velocity": [float(x) for x in self.velocity],
            "inlier_count": int(self.inliers.sum()),
            "inlier_rate": float(self.inlier_rate),
            "inliers": [int(x) for x in self.inliers],
        }


def eve_ransac(obs: DopplerObservations, threshold: float = DEFAULT_THRESHOLD,
               iterations: int = DEFAULT_ITERATIONS, rng_seed: int = 0) -> RansacResult:
    """3-point RANSAC on |v_r - d . v|, then WLS refit on the consensus set.

    Hypotheses are ranked by (inlier count desc, summed inlier residual asc,
    draw index asc). The refit model re-labels inliers once and is refit
    again if the labelling changed.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    n = len(obs)
    usable = np.flatnonzero(obs.weight > 0)
    if usable.size < 3:
        raise ConsensusError(f"need >= 3 usable observations, got {usable.size}")
    rng = np.random.default_rng(int(rng_seed))
    D = obs.design()
    y = obs.radial_velocity
    picks = np.array([rng.choice(usable, size=3, replace=False) for _ in range(int(iterations))])
    M = D[picks]  # (N, 3, 3)
    ok = np.abs(np.linalg.det(M)) > 1e-9
    if not ok.any():
        raise ConsensusError("every minimal sample had degenerate bearings")
    models = np.zeros((picks.shape[0], 3))
    models[ok] = np.linalg.solve(M[ok], y[picks[ok]][..., None])[..., 0]
    resid = np.abs(y[None, :] - models @ D.T)
    inl = (resid <= threshold) & (obs.weight > 0)[None, :]
    count = np.where(ok, inl.sum(1), -1)
    score = np.where(inl, resid, 0.0).sum(1)
    order = np.lexsort((np.arange(count.size), score, -count))
    best = order[0]
    if count[best] < 3:
        raise ConsensusError(f"best hypothesis has only {count[best]} inliers at threshold {threshold}")
    flags = inl[best]
    try:
        v = eve_wls(obs.subset(flags))
    except DegenerateGeometryError:
        v = models[best]
    new_flags = (np.abs(y - D @ v) <= threshold) & (obs.weight > 0)
    if new_flags.sum() >= 3 and not np.array_equal(new_flags, flags):
        try:
            v = eve_wls(obs.subset(new_flags))
            flags = new_flags
        except DegenerateGeometryError:
            pass
    return RansacResult(v, flags, float(flags.sum() / usable.size), int(ok.sum()))


# -- bearing surface, soft mask and the Doppler-consistency loss ---------------

@dataclass
class BearingProfile:
    """Per-bearing Doppler evidence over the (A, E) surface."""
    azimuth: np.ndarray
    elevation: np.ndarray
    doppler: np.ndarray
    valid: np.ndarray

    def observations(self, weights) -> DopplerObservations:
        w = np.where(self.valid, np.asarray(weights, dtype=float), 0.0)
        return DopplerObservations(self.azimuth.ravel(), self.elevation.ravel(),
                                   self.doppler.ravel(), w.ravel())


def bearing_profile(sddr, occupancy=None, validity_floor: float = 0.05) -> BearingProfile:
    """Reduce an SDDR over range: each bearing takes the Doppler of its
    highest-occupancy range cell (``occupancy`` defaults to the SDDR's own u)."""
    x = sddr.u if occupancy is None else np.asarray(occupancy, dtype=float)
    k = np.argmax(x, axis=0)
    A, E = x.shape[1:]
    ii, jj = np.meshgrid(np.arange(A), np.arange(E), indexing="ij")
    peak = x[k, ii, jj]
    top = x.max() if x.size else 0.0
    az, el, visible = sddr.cfg.angle_grid()
    valid = visible & sddr.valid[k, ii, jj] & (peak > 0) & (peak >= validity_floor * top)
    return BearingProfile(az, el, np.where(valid, sddr.v[k, ii, jj], 0.0), valid)


def soft_mask(x_t, temperature: float = 1.0, valid=None) -> np.ndarray:
    """Max over range, then softmax over the flattened (A, E) surface.

    Cells outside ``valid`` (if given) receive zero mass.
    """
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    x = np.asarray(x_t, dtype=float)
    red = x.max(axis=0) if x.ndim == 3 else x
    z = red / temperature
    if valid is not None:
        z = np.where(valid, z, -np.inf)
    if not np.isfinite(z).any():
        return np.zeros_like(red)
    z = z - z[np.isfinite(z)].max()
    w = np.exp(z)
    return w / w.sum()


def wls_from_mask(mask, profile: BearingProfile) -> np.ndarray:
    return eve_wls(profile.observations(mask))


def squared_error(mask, profile: BearingProfile, v_true) -> float:
    v_hat = wls_from_mask(mask, profile)
    d = np.asarray(v_true, dtype=float) - v_hat
    return float(d @ d)


def squared_error_grad(mask, profile: BearingProfile, v_true) -> np.ndarray:
    """d ||v_true - v_hat(M)||^2 / dM over the (A, E) surface.

    With N = D^T W D and v_hat = N^{-1} D^T W y, dv_hat/dw_i = N^{-1} d_i r_i
    where r_i = y_i - d_i . v_hat. Invalid bearings carry zero gradient.
    """
    obs = profile.observations(mask)
    v_hat = eve_wls(obs)
    D = obs.design()
    r = obs.radial_velocity - D @ v_hat
    N = D.T @ (obs.weight[:, None] * D)
    g_v = -2.0 * (np.asarray(v_true, dtype=float) - v_hat)
    sens = np.linalg.solve(N, g_v)  # N symmetric
    grad = (D @ sens) * r
    grad = np.where(profile.valid.ravel(), grad, 0.0)
    return grad.reshape(profile.valid.shape)


def doppler_consistency_loss(mask, profile: BearingProfile, v_true, t: int, s: Schedule) -> float:
    """Step-weighted squared ego-velocity error of the mask-weighted WLS estimate."""
    w_t = doppler_loss_weight(s, t)
    mask = np.asarray(mask, dtype=float)
    if mask.shape != profile.valid.shape:
        raise ValueError(f"mask shape {mask.shape} does not match bearing surface {profile.valid.shape}")
    return w_t * squared_error(mask, profile, v_true)


def doppler_surface(v, azimuth_grid, elevation_grid) -> np.ndarray:
    """Radial speed over an (A, E) bearing grid for ego velocity v."""
    a, e = np.meshgrid(np.asarray(azimuth_grid, float), np.asarray(elevation_grid, float), indexing="ij")
    return direction(a, e) @ np.asarray(v, dtype=float)


def check_velocity(v, cap: float = SPEED_CAP) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ValueError("ego velocity must be a finite 3-vector")
    if np.linalg.norm(v) >= cap:
        raise ValueError(f"|v| = {np.linalg.norm(v):.2f} m/s exceeds the {cap} m/s cap")
    return v


def observations_from_sddr(sddr) -> DopplerObservations:
    """One observation per valid cell, weighted by occupancy."""
    az, el, visible = sddr.cfg.angle_grid()
    m = sddr.valid & visible[None]
    R = sddr.u.shape[0]
    A = np.broadcast_to(az, sddr.u.shape)[m]
    E = np.broadcast_to(el, sddr.u.shape)[m]
    return DopplerObservations(A, E, sddr.v[m], sddr.u[m])
