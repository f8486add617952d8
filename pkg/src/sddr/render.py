"""Uncompressed PPM (P6) rendering of 2-D fields."""
from __future__ import annotations

import numpy as np


def to_gray(field: np.ndarray) -> np.ndarray:
    """Min-max scale to 0..255; a constant field renders black."""
    f = np.asarray(field, dtype=float)
    lo, hi = f.min(), f.max()
    if not hi > lo:
        return np.zeros(f.shape, dtype=np.uint8)
    return np.round((f - lo) / (hi - lo) * 255.0).astype(np.uint8)


def ppm_bytes(field: np.ndarray, scale: int = 1) -> bytes:
    """Rows of ``field`` become image rows; each cell is a scale x scale block."""
    g = to_gray(field)
    if scale > 1:
        g = np.kron(g, np.ones((scale, scale), dtype=np.uint8))
    h, w = g.shape
    rgb = np.repeat(g[..., None], 3, axis=-1)
    return f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes()


def bev(occupancy: np.ndarray) -> np.ndarray:
    """Range x azimuth image (max over elevation), nearest range at the bottom."""
    return np.asarray(occupancy, dtype=float).max(axis=2)[::-1]


def read_ppm(blob: bytes) -> np.ndarray:
    parts = blob.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ValueError("not a binary PPM")
    w, h = (int(x) for x in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)
