"""Radar configuration and the polar/direction-cosine grid it induces.

Angle bins come from FFTs across a uniform rectangular virtual array, so the
native grid is uniform in direction cosines (w_y = sin a cos e, w_z = sin e),
not in the angles themselves. Cell centres are converted to (azimuth,
elevation) on demand; bins outside the visible region (w_y^2 + w_z^2 >= 1)
are flagged invisible.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class RadarConfig:
    samples_per_chirp: int = 64
    chirps_per_frame: int = 64
    azimuth_elements: int = 16
    elevation_elements: int = 8
    element_spacing: float = 0.5  # wavelengths
    carrier_wavelength: float = SPEED_OF_LIGHT / 77e9
    bandwidth: float = 500e6
    chirp_duration: float = 4e-4
    range_bins: int = 32
    azimuth_bins: int = 16
    elevation_bins: int = 8
    doppler_bins: int = 64
    range_falloff: bool = False

    def __post_init__(self):
        if self.doppler_bins != self.chirps_per_frame:
            raise ValueError("doppler_bins must equal chirps_per_frame")
        if not 1 <= self.range_bins <= self.samples_per_chirp:
            raise ValueError("range_bins must lie in [1, samples_per_chirp]")
        if self.azimuth_bins < self.azimuth_elements or self.elevation_bins < self.elevation_elements:
            raise ValueError("angle bins must be >= physical array size (zero-padding only)")
        if min(self.azimuth_elements, self.elevation_elements) < 1:
            raise ValueError("array must have at least one element per axis")
        if not (self.carrier_wavelength > 0 and self.bandwidth > 0 and self.chirp_duration > 0
                and self.element_spacing > 0):
            raise ValueError("physical parameters must be positive")
        for n in (self.azimuth_bins, self.elevation_bins, self.doppler_bins):
            if n % 2:
                raise ValueError("angle and Doppler bin counts must be even")

    # -- derived calibration -------------------------------------------------
    @property
    def num_antennas(self) -> int:
        return self.azimuth_elements * self.elevation_elements

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.range_bins, self.azimuth_bins, self.elevation_bins)

    @property
    def range_resolution(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.bandwidth)

    @property
    def v_max(self) -> float:
        return self.carrier_wavelength / (4.0 * self.chirp_duration)

    @property
    def doppler_resolution(self) -> float:
        return 2.0 * self.v_max / self.doppler_bins

    @property
    def r_min(self) -> float:
        return 0.5 * self.range_resolution

    @property
    def r_max(self) -> float:
        return (self.range_bins - 0.5) * self.range_resolution

    def range_centers(self) -> np.ndarray:
        return np.arange(self.range_bins) * self.range_resolution

    def wy_centers(self) -> np.ndarray:
        A = self.azimuth_bins
        return (np.arange(A) - A // 2) / (A * self.element_spacing)

    def wz_centers(self) -> np.ndarray:
        E = self.elevation_bins
        return (np.arange(E) - E // 2) / (E * self.element_spacing)

    def angle_grid(self):
        """(azimuth, elevation, visible) arrays over (A, E) in radians."""
        wy, wz = np.meshgrid(self.wy_centers(), self.wz_centers(), indexing="ij")
        rho = wy ** 2 + wz ** 2
        visible = rho < 1.0
        wx = np.sqrt(np.clip(1.0 - rho, 0.0, None))
        el = np.arcsin(np.clip(wz, -1.0, 1.0))
        az = np.arctan2(wy, wx)
        return az, el, visible

    def cell_centers_cartesian(self) -> np.ndarray:
        """Cartesian centres of every (r, a, e) cell, shape (R, A, E, 3)."""
        wy, wz = np.meshgrid(self.wy_centers(), self.wz_centers(), indexing="ij")
        wx = np.sqrt(np.clip(1.0 - wy ** 2 - wz ** 2, 0.0, None))
        dirs = np.stack([wx, wy, wz], axis=-1)
        return self.range_centers()[:, None, None, None] * dirs[None]

    def cell_of(self, position) -> tuple[int, int, int]:
        """Nearest (range, azimuth, elevation) bin of a Cartesian point; raises if uncovered."""
        p = np.asarray(position, dtype=float)
        r = float(np.linalg.norm(p))
        if not self.r_min <= r < self.r_max or p[0] <= 0:
            raise ValueError(f"position {p.tolist()} outside range coverage "
                             f"[{self.r_min:.3f}, {self.r_max:.3f}) m or behind the array")
        k = int(round(r / self.range_resolution))
        i = int(round(p[1] / r * self.azimuth_bins * self.element_spacing)) + self.azimuth_bins // 2
        j = int(round(p[2] / r * self.elevation_bins * self.element_spacing)) + self.elevation_bins // 2
        if not (0 <= i < self.azimuth_bins and 0 <= j < self.elevation_bins):
            raise ValueError(f"position {p.tolist()} outside angular coverage")
        return k, i, j

    def cell_center(self, k: int, i: int, j: int) -> np.ndarray:
        return self.cell_centers_cartesian()[k, i, j]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RadarConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown radar config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def direction(azimuth, elevation) -> np.ndarray:
    """Unit line-of-sight vectors [cos a cos e, sin a cos e, sin e], shape (..., 3)."""
    a = np.asarray(azimuth, dtype=float)
    e = np.asarray(elevation, dtype=float)
    return np.stack([np.cos(a) * np.cos(e), np.sin(a) * np.cos(e), np.sin(e)], axis=-1)


def polar_to_cartesian(r, azimuth, elevation) -> np.ndarray:
    return np.asarray(r, dtype=float)[..., None] * direction(azimuth, elevation)
