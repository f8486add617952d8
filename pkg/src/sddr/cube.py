"""ADC frame -> 4-D radar cube -> spatial/Doppler representation (occupancy u, Doppler v)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .radar import RadarConfig

WINDOWS = ("none", "hann")
DEFAULT_SIGMAS = (0.2, 0.5, 1.0)
DEFAULT_VALIDITY_FLOOR = 0.05


@dataclass
class RadarCube:
    magnitude: np.ndarray  # (R, A, E, D), Doppler fft-shifted
    cfg: RadarConfig

    def doppler_velocities(self) -> np.ndarray:
        return doppler_bin_to_velocity(np.arange(self.cfg.doppler_bins), self.cfg)


@dataclass
class Sddr:
    u: np.ndarray  # (R, A, E) occupancy in [0, 1]
    v: np.ndarray  # (R, A, E) Doppler velocity, m/s; 0 where invalid
    valid: np.ndarray  # (R, A, E) bool
    cfg: RadarConfig

    @property
    def shape(self):
        return self.u.shape


def doppler_bin_to_velocity(bin, cfg: RadarConfig):
    b = np.asarray(bin)
    D = cfg.doppler_bins
    if np.any(b < 0) or np.any(b >= D):
        raise ValueError(f"Doppler bin outside [0, {D})")
    out = (b - D // 2) * (2.0 * cfg.v_max / D)
    return float(out) if out.ndim == 0 else out


def _periodic_hann(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def adc_to_cube(adc: np.ndarray, cfg: RadarConfig, window: str = "none") -> RadarCube:
    """FFTs over fast time (range), chirps (Doppler) and both array axes (angle).

    ``window='hann'`` tapers fast time and slow time only; the array axes are
    left unwindowed since small apertures lose too much gain.
    """
    if window not in WINDOWS:
        raise ValueError(f"unsupported window {window!r}; choose from {WINDOWS}")
    expected = (cfg.num_antennas, cfg.chirps_per_frame, cfg.samples_per_chirp)
    if adc.shape != expected:
        raise ValueError(f"ADC shape {adc.shape} does not match config {expected}")
    x = adc.reshape(cfg.azimuth_elements, cfg.elevation_elements,
                    cfg.chirps_per_frame, cfg.samples_per_chirp)
    if window == "hann":
        x = x * _periodic_hann(cfg.chirps_per_frame)[:, None] * _periodic_hann(cfg.samples_per_chirp)[None, :]
    x = np.fft.fft(x, axis=3)[..., : cfg.range_bins]
    x = np.fft.fftshift(np.fft.fft(x, axis=2), axes=2)
    x = np.fft.fftshift(np.fft.fft(x, n=cfg.azimuth_bins, axis=0), axes=0)
    x = np.fft.fftshift(np.fft.fft(x, n=cfg.elevation_bins, axis=1), axes=1)
    # (A, E, D, R) -> (R, A, E, D)
    mag = np.abs(np.transpose(x, (3, 0, 1, 2)))
    return RadarCube(np.ascontiguousarray(mag), cfg)


def cube_to_sddr(cube: RadarCube, validity_floor: float = DEFAULT_VALIDITY_FLOOR) -> Sddr:
    mag = cube.magnitude
    D = mag.shape[-1]
    peak = mag.max(axis=-1)
    # ties on the Doppler peak resolve toward the zero-velocity bin
    dist = np.abs(np.arange(D) - D // 2)
    score = np.where(mag == peak[..., None], dist, D + 1)
    idx = np.argmin(score, axis=-1)
    top = peak.max() if peak.size else 0.0
    u = peak / top if top > 0 else np.zeros_like(peak)
    valid = (u > 0) & (u >= validity_floor)
    v = np.where(valid, doppler_bin_to_velocity(idx, cube.cfg), 0.0)
    return Sddr(u=u, v=v, valid=valid, cfg=cube.cfg)


def doppler_peak_ratio(spectrum: np.ndarray) -> float:
    """Global Doppler peak over the strongest other local maximum (circular axis).

    Bins on the flank of the main lobe are not peaks; a plateau counts once.
    Returns inf when no second local maximum exists.
    """
    x = np.asarray(spectrum, dtype=float)
    left, right = np.roll(x, 1), np.roll(x, -1)
    is_peak = (x >= left) & (x > right)
    g = int(np.argmax(x))
    # walk right across a plateau so the global peak is identified with its peak bin
    while not is_peak[g] and x[(g + 1) % x.size] == x[g]:
        g = (g + 1) % x.size
    is_peak[g] = False
    if not is_peak.any():
        return math.inf
    second = x[is_peak].max()
    return math.inf if second == 0 else float(x[g] / second)


def _gauss_kernel(sigma: float) -> np.ndarray:
    radius = max(1, int(math.ceil(4.0 * sigma)))
    d = np.arange(-radius, radius + 1, dtype=float)
    return np.exp(-0.5 * (d / sigma) ** 2)


def _blur(vol: np.ndarray, sigma: float) -> np.ndarray:
    out = vol
    k = _gauss_kernel(sigma)
    r = k.size // 2
    for ax in range(vol.ndim):
        n = out.shape[ax]
        out = np.apply_along_axis(lambda m: np.convolve(m, k)[r:r + n], ax, out)
    return out


def soften(truth_occupancy: np.ndarray, sigmas: Sequence[float] = DEFAULT_SIGMAS,
           renormalize: bool = True) -> np.ndarray:
    """Max-combined Gaussian blurs (unit-peak kernels, sigmas in cells)."""
    sigmas = list(sigmas)
    if not sigmas or any(not s > 0 for s in sigmas):
        raise ValueError(f"sigmas must be positive, got {sigmas}")
    x = np.asarray(truth_occupancy, dtype=float)
    out = np.max([_blur(x, s) for s in sigmas], axis=0)
    if renormalize:
        top = out.max() if out.size else 0.0
        if top > 0:
            out = out / top
    return out
