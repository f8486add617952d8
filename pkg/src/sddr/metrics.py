"""Point-cloud extraction (threshold, OS-CFAR) and evaluation metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels

EXACT_EMD_CAP = 4096
DEFAULT_TAU = 0.3
SINKHORN_REG = 0.01  # fraction of the largest pairwise distance
SINKHORN_ITERS = 2000


class UndefinedMetricError(ValueError):
    pass


@dataclass
class PointCloud:
    points: np.ndarray
    intensity: Optional[np.ndarray] = None
    doppler: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(self.points)):
            raise ValueError("point coordinates must be finite")
        for name in ("intensity", "doppler"):
            val = getattr(self, name)
            if val is not None:
                val = np.asarray(val, dtype=float).reshape(-1)
                if val.size != len(self) or np.isnan(val).any():
                    raise ValueError(f"{name} must have one finite value per point")
                setattr(self, name, val)

    def __len__(self):
        return self.points.shape[0]

    def subset(self, mask) -> "PointCloud":
        return PointCloud(
            self.points[mask],
            None if self.intensity is None else self.intensity[mask],
            None if self.doppler is None else self.doppler[mask],
        )


def sddr_to_points(sddr, occupancy_threshold: float = 0.5, max_points: Optional[int] = None,
                   occupancy=None) -> PointCloud:
    """Cells with occupancy >= threshold, at their polar cell centres.

    ``occupancy`` overrides ``sddr.u`` (e.g. a refined volume). When more than
    ``max_points`` cells qualify the highest-occupancy cells win; ties go to
    the lower flat index.
    """
    if not 0.0 < occupancy_threshold < 1.0:
        raise ValueError("occupancy_threshold must lie in (0, 1)")
    x = sddr.u if occupancy is None else np.asarray(occupancy, dtype=float)
    _, _, visible = sddr.cfg.angle_grid()
    flat = np.where(visible[None], x, -np.inf).ravel()
    idx = np.flatnonzero(flat >= occupancy_threshold)
    if max_points is not None and idx.size > max_points:
        order = np.lexsort((idx, -flat[idx]))
        idx = idx[order[:max_points]]
    idx = np.sort(idx)
    centres = sddr.cfg.cell_centers_cartesian().reshape(-1, 3)
    return PointCloud(centres[idx], intensity=flat[idx], doppler=sddr.v.ravel()[idx])


def top_points(sddr, n: int, occupancy=None) -> PointCloud:
    """The ``n`` highest-occupancy visible cells (raw-threshold baseline at a matched count)."""
    x = sddr.u if occupancy is None else np.asarray(occupancy, dtype=float)
    return sddr_to_points(sddr, occupancy_threshold=1e-12, max_points=n, occupancy=np.where(x > 0, x, 0))


# -- OS-CFAR --------------------------------------------------------------------

def os_cfar_scale(pfa: float, n_train: int, k: int) -> float:
    """Power-domain scale T giving false-alarm probability ``pfa`` in
    exponential noise for threshold T * (k-th smallest of n_train cells):
    pfa = prod_{i=0}^{k-1} (n-i) / (n-i+T)."""
    if not 0 < pfa < 1 or not 1 <= k <= n_train:
        raise ValueError("need 0 < pfa < 1 and 1 <= k <= n_train")

    def f(T):
        i = np.arange(k)
        return np.prod((n_train - i) / (n_train - i + T)) - pfa

    lo, hi = 0.0, 1.0
    while f(hi) > 0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def os_cfar(x, guard: int, train: int, k: int, scale: float, axis: int = -1) -> np.ndarray:
    """Ordered-statistic CFAR along one axis.

    ``train`` and ``guard`` are per side; the threshold is ``scale`` times the
    k-th smallest training value. Near the edges the window shrinks (no
    wrap-around) and the rank is rescaled to the same quantile,
    ceil(k * m / (2 * train)) of the m cells that remain.
    """
    x = np.asarray(x, dtype=float)
    if not (2 * train >= k >= 1 and guard >= 0):
        raise ValueError("need 2 * train >= k >= 1 (train is per side) and guard >= 0")
    n = x.shape[axis]
    if n < 2 * (guard + train) + 1:
        raise ValueError(f"CFAR window {2 * (guard + train) + 1} larger than axis length {n}")
    moved = np.moveaxis(x, axis, -1)
    flat = moved.reshape(-1, n)
    out = np.empty(flat.shape, dtype=bool)
    for row in range(flat.shape[0]):
        out[row] = kernels.os_cfar_1d(flat[row], guard, train, k, scale).astype(bool)
    return np.moveaxis(out.reshape(moved.shape), -1, axis)


# -- distances --------------------------------------------------------------------

def _require(P: PointCloud, Q: PointCloud, what: str):
    if len(P) == 0 or len(Q) == 0:
        raise UndefinedMetricError(f"{what} undefined for an empty cloud")


def nn_distances(P: PointCloud, Q: PointCloud) -> np.ndarray:
    """Distance from every point of P to its nearest point in Q."""
    if len(P) == 0:
        return np.zeros(0)
    if len(Q) == 0:
        return np.full(len(P), np.inf)
    return kernels.nearest(P.points, Q.points)[0]


def chamfer(P: PointCloud, Q: PointCloud) -> float:
    _require(P, Q, "Chamfer distance")
    return 0.5 * (float(nn_distances(P, Q).mean()) + float(nn_distances(Q, P).mean()))


def pairwise(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    return np.sqrt(((P[:, None, :] - Q[None, :, :]) ** 2).sum(-1))


def _sinkhorn_cost(C: np.ndarray, reg: float, iters: int) -> float:
    n, m = C.shape
    log_a = np.full(n, -math.log(n))
    log_b = np.full(m, -math.log(m))
    eps = reg * max(C.max(), 1e-12)
    K = -C / eps
    f = np.zeros(n)
    g = np.zeros(m)
    for _ in range(iters):
        f = eps * (log_a - _lse(K + g[None, :] / eps, axis=1))
        g = eps * (log_b - _lse(K + f[:, None] / eps, axis=0))
    # columns match exactly after the last g-update; rows to iteration tolerance
    P = np.exp(K + f[:, None] / eps + g[None, :] / eps)
    return float((P * C).sum())


def _lse(x, axis):
    m = x.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(x - m).sum(axis=axis, keepdims=True))).squeeze(axis)


def emd(P: PointCloud, Q: PointCloud, mode: str = "exact", rng_seed: int = 0,
        size_cap: int = EXACT_EMD_CAP, reg: float = SINKHORN_REG,
        iterations: int = SINKHORN_ITERS) -> float:
    """Mean matched distance under the optimal one-to-one assignment.

    ``exact``: equal sizes solved by the assignment kernel; a smaller cloud is
    first resampled with replacement (uniform, seeded) up to the larger size.
    ``approximate``: entropy-regularised transport between uniform measures,
    regularisation ``reg`` times the largest pairwise distance.
    """
    _require(P, Q, "EMD")
    if mode == "approximate":
        return _sinkhorn_cost(pairwise(P.points, Q.points), reg, iterations)
    if mode != "exact":
        raise ValueError(f"unknown EMD mode {mode!r}")
    a, b = P.points, Q.points
    if len(a) != len(b):
        rng = np.random.default_rng(int(rng_seed))
        if len(a) < len(b):
            a = np.concatenate([a, a[rng.integers(len(a), size=len(b) - len(a))]])
        else:
            b = np.concatenate([b, b[rng.integers(len(b), size=len(a) - len(b))]])
    if len(a) > size_cap:
        raise ValueError(f"exact EMD limited to {size_cap} points; use mode='approximate'")
    C = pairwise(a, b)
    cols = kernels.assignment(C)
    return float(C[np.arange(len(a)), cols].mean())


# -- clutter / shot sets and quality ----------------------------------------------

@dataclass(frozen=True)
class MetricParams:
    tau1: float = DEFAULT_TAU
    tau2: float = DEFAULT_TAU

    def __post_init__(self):
        if not (self.tau1 > 0 and self.tau2 > 0):
            raise ValueError("tau1 and tau2 must be positive")


def clutter_mask(P: PointCloud, Q: PointCloud, params: MetricParams) -> np.ndarray:
    """Points of P farther than tau1 from every point of Q (all of P if Q is empty)."""
    return nn_distances(P, Q) > params.tau1


def shot_mask(P: PointCloud, Q: PointCloud, params: MetricParams) -> np.ndarray:
    """Points of Q within tau2 (strictly) of some point of P."""
    return nn_distances(Q, P) < params.tau2


def clutter_set(P, Q, params: MetricParams) -> PointCloud:
    return P.subset(clutter_mask(P, Q, params))


def shot_set(P, Q, params: MetricParams) -> PointCloud:
    return Q.subset(shot_mask(P, Q, params))


@dataclass(frozen=True)
class Quality:
    vpr: float
    srl: float
    egd: Optional[float]  # None when no truth point is shot

    def to_dict(self):
        return {"VPR": self.vpr, "SRL": self.srl, "EGD": self.egd}


def quality(P: PointCloud, Q: PointCloud, params: MetricParams = MetricParams()) -> Quality:
    if len(P) == 0 or len(Q) == 0:
        raise UndefinedMetricError("VPR/SRL/EGD need non-empty clouds")
    n_clutter = int(clutter_mask(P, Q, params).sum())
    n_shot = int(shot_mask(P, Q, params).sum())
    egd = (len(P) - n_clutter) / n_shot if n_shot else None
    return Quality(1.0 - n_clutter / len(P), n_shot / len(Q), egd)


def evaluate(P: PointCloud, Q: PointCloud, params: MetricParams = MetricParams(),
             emd_mode: str = "exact", rng_seed: int = 0) -> dict:
    """All metrics as a JSON-ready dict."""
    q = quality(P, Q, params)
    return {
        "CD": chamfer(P, Q),
        "EMD": emd(P, Q, mode=emd_mode, rng_seed=rng_seed),
        "emd_mode": emd_mode,
        "n_pred": len(P),
        "n_truth": len(Q),
        "tau1": params.tau1,
        "tau2": params.tau2,
        **q.to_dict(),
    }
