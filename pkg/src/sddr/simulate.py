"""Synthetic FMCW frames with exact ground truth.

Ideal point-scatterer IF model: each scatterer contributes a complex
exponential with a fast-time ramp (range), a slow-time ramp (radial velocity)
and two spatial ramps across the virtual array (direction cosines).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .radar import RadarConfig

DEFAULT_NOISE_FLOOR = 2.0
GHOST_RANGE_INFLATION = (1.1, 1.5)
GHOST_REFLECTIVITY_SCALE = (0.6, 1.0)


class CoverageError(ValueError):
    pass


@dataclass(frozen=True)
class Scatterer:
    position: tuple[float, float, float]
    reflectivity: float = 1.0
    is_ghost: bool = False
    own_velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def line_of_sight(self) -> np.ndarray:
        p = np.asarray(self.position, dtype=float)
        return p / np.linalg.norm(p)

    def radial_velocity(self, ego_velocity) -> float:
        """Closing speed along the line of sight (positive = approaching)."""
        rel = np.asarray(ego_velocity, dtype=float) - np.asarray(self.own_velocity, dtype=float)
        return float(self.line_of_sight() @ rel)


@dataclass(frozen=True)
class Scene:
    scatterers: tuple[Scatterer, ...] = ()
    ego_velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def real(self) -> tuple[Scatterer, ...]:
        return tuple(s for s in self.scatterers if not s.is_ghost)

    @property
    def ghosts(self) -> tuple[Scatterer, ...]:
        return tuple(s for s in self.scatterers if s.is_ghost)

    def to_dict(self) -> dict:
        return {
            "ego_velocity": [float(x) for x in self.ego_velocity],
            "scatterers": [
                {
                    "position": [float(x) for x in s.position],
                    "reflectivity": float(s.reflectivity),
                    "is_ghost": bool(s.is_ghost),
                    "own_velocity": [float(x) for x in s.own_velocity],
                }
                for s in self.scatterers
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Scene":
        scat = []
        for n, s in enumerate(doc.get("scatterers", [])):
            try:
                scat.append(Scatterer(
                    position=tuple(float(x) for x in s["position"]),
                    reflectivity=float(s.get("reflectivity", 1.0)),
                    is_ghost=bool(s.get("is_ghost", False)),
                    own_velocity=tuple(float(x) for x in s.get("own_velocity", (0.0, 0.0, 0.0))),
                ))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"scatterer #{n}: {exc}") from exc
            if len(scat[-1].position) != 3 or len(scat[-1].own_velocity) != 3:
                raise ValueError(f"scatterer #{n}: vectors must have 3 components")
        ego = tuple(float(x) for x in doc.get("ego_velocity", (0.0, 0.0, 0.0)))
        if len(ego) != 3:
            raise ValueError("ego_velocity must have 3 components")
        return cls(tuple(scat), ego)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def check_coverage(scene: Scene, cfg: RadarConfig) -> None:
    for n, s in enumerate(scene.scatterers):
        try:
            cfg.cell_of(s.position)
        except ValueError as exc:
            raise CoverageError(f"scatterer #{n}: {exc}") from None
        vr = s.radial_velocity(scene.ego_velocity)
        if abs(vr) >= cfg.v_max:
            raise CoverageError(f"scatterer #{n}: radial velocity {vr:.3f} m/s aliases "
                                f"(|v| must be < {cfg.v_max:.3f})")


def synthesize_adc(scene: Scene, cfg: RadarConfig, rng_seed: int = 0,
                   noise_floor: float = 0.0) -> np.ndarray:
    """Complex ADC block of shape (antennas, chirps, samples).

    Antenna index is ``p * elevation_elements + q`` for azimuth element p and
    elevation element q.
    """
    check_coverage(scene, cfg)
    Pa, Pe = cfg.azimuth_elements, cfg.elevation_elements
    M, N = cfg.chirps_per_frame, cfg.samples_per_chirp
    d = cfg.element_spacing
    S = len(scene.scatterers)
    # sum of rank-1 terms: (antenna ramps) x (slow-time ramp) x (fast-time ramp)
    spatial = np.zeros((S, Pa * Pe), dtype=np.complex128)
    temporal = np.zeros((S, M * N), dtype=np.complex128)
    p_idx, q_idx = np.arange(Pa), np.arange(Pe)
    m_idx, n_idx = np.arange(M), np.arange(N)
    for n, s in enumerate(scene.scatterers):
        pos = np.asarray(s.position, dtype=float)
        r = float(np.linalg.norm(pos))
        wy, wz = pos[1] / r, pos[2] / r
        f_range = r / cfg.range_resolution / N  # cycles per fast-time sample
        f_dopp = 2.0 * s.radial_velocity(scene.ego_velocity) * cfg.chirp_duration / cfg.carrier_wavelength
        amp = s.reflectivity * (1.0 / r ** 2 if cfg.range_falloff else 1.0)
        phase0 = 4.0 * np.pi * r / cfg.carrier_wavelength
        ant = np.exp(2j * np.pi * d * (wy * p_idx[:, None] + wz * q_idx[None, :]))
        spatial[n] = amp * np.exp(1j * phase0) * ant.ravel()
        temporal[n] = np.outer(np.exp(2j * np.pi * f_dopp * m_idx),
                               np.exp(2j * np.pi * f_range * n_idx)).ravel()
    adc = (spatial.T @ temporal).reshape(Pa * Pe, M, N)
    if noise_floor > 0:
        rng = np.random.default_rng(int(rng_seed))
        adc += (noise_floor / np.sqrt(2.0)) * (
            rng.standard_normal(adc.shape) + 1j * rng.standard_normal(adc.shape))
    return adc


def ghost_count(n_real: int, ghost_fraction: float) -> int:
    if not 0.0 <= ghost_fraction < 1.0:
        raise ValueError(f"ghost_fraction must lie in [0, 1), got {ghost_fraction}")
    return int(round(n_real * ghost_fraction / (1.0 - ghost_fraction)))


def _snap(cfg: RadarConfig, position) -> tuple[float, float, float]:
    k, i, j = cfg.cell_of(position)
    return tuple(float(x) for x in cfg.cell_center(k, i, j))


def inject_ghosts(scene: Scene, ghost_fraction: float, rng_seed: int,
                  cfg: RadarConfig | None = None, on_grid: bool = True) -> Scene:
    """Append multipath-style ghosts: mirrored in azimuth, range-inflated,
    with a radial velocity drawn uniformly in (-v_max, v_max)."""
    cfg = cfg or RadarConfig()
    real = scene.real
    n_g = ghost_count(len(real), ghost_fraction)
    if n_g == 0:
        return scene
    rng = np.random.default_rng(int(rng_seed))
    taken = set()
    for s in scene.scatterers:
        try:
            taken.add(cfg.cell_of(s.position))
        except ValueError:
            pass
    ghosts = []
    ego = np.asarray(scene.ego_velocity, dtype=float)
    while len(ghosts) < n_g:
        src = real[int(rng.integers(len(real)))]
        pos = np.asarray(src.position, dtype=float) * np.array([1.0, -1.0, 1.0])
        pos = pos * rng.uniform(*GHOST_RANGE_INFLATION)
        r = np.linalg.norm(pos)
        if r >= cfg.r_max - cfg.range_resolution:
            pos = pos * (cfg.r_max - cfg.range_resolution) / r
        if on_grid:
            pos = np.asarray(_snap(cfg, pos))
            cell = cfg.cell_of(pos)
            if cell in taken and len(taken) < np.prod(cfg.shape):
                # deterministic nudge one range bin inward to keep cells distinct
                pos = pos * (1.0 - cfg.range_resolution / np.linalg.norm(pos))
                pos = np.asarray(_snap(cfg, pos))
                cell = cfg.cell_of(pos)
            taken.add(cell)
        los = pos / np.linalg.norm(pos)
        v_des = rng.uniform(-0.95, 0.95) * cfg.v_max
        own = (los @ ego - v_des) * los
        ghosts.append(Scatterer(
            position=tuple(float(x) for x in pos),
            reflectivity=float(src.reflectivity * rng.uniform(*GHOST_REFLECTIVITY_SCALE)),
            is_ghost=True,
            own_velocity=tuple(float(x) for x in own),
        ))
    return replace(scene, scatterers=scene.scatterers + tuple(ghosts))


def random_scene(cfg: RadarConfig, n_scatterers: int, rng_seed: int,
                 ego_velocity=None, max_wy: float = 0.75, max_wz: float = 0.5,
                 reflectivity=(0.3, 1.0)) -> Scene:
    """Static scene with scatterers on distinct cell centres inside a field of view."""
    rng = np.random.default_rng(int(rng_seed))
    wy, wz = cfg.wy_centers(), cfg.wz_centers()
    ai = np.flatnonzero(np.abs(wy) <= max_wy)
    ej = np.flatnonzero(np.abs(wz) <= max_wz)
    ks = np.arange(2, cfg.range_bins - 1)
    cells = np.array(np.meshgrid(ks, ai, ej, indexing="ij")).reshape(3, -1).T
    if n_scatterers > len(cells):
        raise ValueError("more scatterers than available cells")
    pick = cells[rng.choice(len(cells), size=n_scatterers, replace=False)]
    centers = cfg.cell_centers_cartesian()
    if ego_velocity is None:
        speed = rng.uniform(0.5, 2.0)
        az = rng.uniform(-0.6, 0.6)
        el = rng.uniform(-0.3, 0.3)
        ego_velocity = speed * np.array([np.cos(az) * np.cos(el), np.sin(az) * np.cos(el), np.sin(el)])
    scat = tuple(
        Scatterer(position=tuple(float(x) for x in centers[k, i, j]),
                  reflectivity=float(rng.uniform(*reflectivity)))
        for k, i, j in pick)
    return Scene(scat, tuple(float(x) for x in ego_velocity))


def ground_truth(scene: Scene, cfg: RadarConfig):
    """Truth point cloud (real scatterers only) and truth SDDR."""
    from .cube import Sddr
    from .metrics import PointCloud

    real = scene.real
    shape = cfg.shape
    u = np.zeros(shape)
    v = np.zeros(shape)
    for s in real:
        k, i, j = cfg.cell_of(s.position)
        u[k, i, j] = 1.0
        v[k, i, j] = s.radial_velocity(scene.ego_velocity)
    pts = np.array([s.position for s in real], dtype=float).reshape(-1, 3)
    cloud = PointCloud(
        pts,
        intensity=np.array([s.reflectivity for s in real], dtype=float),
        doppler=np.array([s.radial_velocity(scene.ego_velocity) for s in real], dtype=float),
    )
    return cloud, Sddr(u=u, v=v, valid=u > 0, cfg=cfg)
