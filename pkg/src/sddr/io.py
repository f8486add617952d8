"""File formats: checksummed binary tensors, point clouds (CSV / PLY), JSON.

Tensor file layout (all little-endian)::

    b"SDDR" | u16 version | u8 dtype tag (1 = f32) | u8 rank | rank x u32 dims
    | u32 n | n bytes of UTF-8 JSON calibration | f32 payload, row-major
    | u32 CRC32 of every preceding byte
"""
from __future__ import annotations

import csv
import io
import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .cube import RadarCube, Sddr
from .metrics import PointCloud
from .radar import RadarConfig

MAGIC = b"SDDR"
VERSION = 1
DTYPE_F32 = 1


class FormatError(ValueError):
    pass


class IntegrityError(FormatError):
    pass


def dumps_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def encode_tensor(array, calibration: dict | None = None) -> bytes:
    a = np.asarray(array)
    if np.iscomplexobj(a):
        raise TypeError("complex tensors must be split into a trailing (re, im) axis")
    payload = np.asarray(a, dtype="<f4", order="C")  # keeps rank 0, unlike ascontiguousarray
    calib = json.dumps(calibration or {}, sort_keys=True).encode("utf-8")
    head = MAGIC + struct.pack("<HBB", VERSION, DTYPE_F32, payload.ndim)
    head += struct.pack(f"<{payload.ndim}I", *payload.shape)
    body = head + struct.pack("<I", len(calib)) + calib + payload.tobytes()
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def decode_tensor(blob: bytes):
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise FormatError("not a tensor file (bad magic)")
    body, trailer = blob[:-4], blob[-4:]
    if zlib.crc32(body) & 0xFFFFFFFF != struct.unpack("<I", trailer)[0]:
        raise IntegrityError("tensor file checksum mismatch")
    version, dtype, rank = struct.unpack_from("<HBB", body, 4)
    if version != VERSION:
        raise FormatError(f"unsupported tensor format version {version}")
    if dtype != DTYPE_F32:
        raise FormatError(f"unsupported dtype tag {dtype}")
    off = 8
    dims = struct.unpack_from(f"<{rank}I", body, off)
    off += 4 * rank
    (n,) = struct.unpack_from("<I", body, off)
    off += 4
    calib = json.loads(body[off:off + n].decode("utf-8"))
    off += n
    expected = int(np.prod(dims, dtype=np.int64)) * 4
    if len(body) - off != expected:
        raise FormatError(f"payload is {len(body) - off} bytes, dims {dims} need {expected}")
    arr = np.frombuffer(body, dtype="<f4", offset=off).reshape(dims).copy()
    return arr, calib


def write_tensor(path, array, calibration: dict | None = None) -> None:
    Path(path).write_bytes(encode_tensor(array, calibration))


def read_tensor(path):
    return decode_tensor(Path(path).read_bytes())


def _config_from(calib: dict) -> RadarConfig:
    if "config" not in calib:
        raise FormatError("tensor calibration block lacks a radar config")
    return RadarConfig.from_dict(calib["config"])


def _expect_kind(calib: dict, kind: str):
    if calib.get("kind") != kind:
        raise FormatError(f"expected a {kind!r} tensor, found {calib.get('kind')!r}")


# -- typed wrappers ---------------------------------------------------------------

def save_adc(path, adc: np.ndarray, cfg: RadarConfig, extra: dict | None = None):
    data = np.stack([adc.real, adc.imag], axis=-1)
    write_tensor(path, data, {"kind": "adc", "config": cfg.to_dict(), **(extra or {})})


def load_adc(path):
    arr, calib = read_tensor(path)
    _expect_kind(calib, "adc")
    cfg = _config_from(calib)
    adc = arr[..., 0].astype(np.float64) + 1j * arr[..., 1].astype(np.float64)
    if adc.shape != (cfg.num_antennas, cfg.chirps_per_frame, cfg.samples_per_chirp):
        raise FormatError(f"ADC dims {adc.shape} disagree with the embedded radar config")
    return adc, cfg


def save_cube(path, cube: RadarCube):
    write_tensor(path, cube.magnitude, {"kind": "cube", "config": cube.cfg.to_dict()})


def load_cube(path) -> RadarCube:
    arr, calib = read_tensor(path)
    _expect_kind(calib, "cube")
    cfg = _config_from(calib)
    if arr.shape != cfg.shape + (cfg.doppler_bins,):
        raise FormatError("cube dims disagree with the embedded radar config")
    return RadarCube(arr.astype(np.float64), cfg)


def save_sddr(path, sddr: Sddr, extra: dict | None = None):
    data = np.stack([sddr.u, sddr.v, sddr.valid.astype(float)], axis=-1)
    write_tensor(path, data, {"kind": "sddr", "config": sddr.cfg.to_dict(),
                              "channels": ["u", "v", "valid"], **(extra or {})})


def load_sddr(path) -> Sddr:
    arr, calib = read_tensor(path)
    _expect_kind(calib, "sddr")
    cfg = _config_from(calib)
    if arr.shape != cfg.shape + (3,):
        raise FormatError("SDDR dims disagree with the embedded radar config")
    a = arr.astype(np.float64)
    return Sddr(u=a[..., 0], v=a[..., 1], valid=a[..., 2] > 0.5, cfg=cfg)


def save_volume(path, vol, cfg: RadarConfig | None, kind: str = "occupancy", extra: dict | None = None):
    calib = {"kind": kind, **(extra or {})}
    if cfg is not None:
        calib["config"] = cfg.to_dict()
    write_tensor(path, vol, calib)


def load_volume(path, kind: str | None = None):
    arr, calib = read_tensor(path)
    if kind is not None:
        _expect_kind(calib, kind)
    return arr.astype(np.float64), calib


# -- point clouds -------------------------------------------------------------------

def cloud_to_csv(cloud: PointCloud) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ["x", "y", "z"]
    extra = []
    if cloud.intensity is not None or cloud.doppler is not None:
        cols += ["intensity", "doppler"]
        zeros = np.zeros(len(cloud))
        extra = [cloud.intensity if cloud.intensity is not None else zeros,
                 cloud.doppler if cloud.doppler is not None else zeros]
    w.writerow(cols)
    for n in range(len(cloud)):
        row = list(cloud.points[n]) + [e[n] for e in extra]
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def cloud_from_csv(text: str) -> PointCloud:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise FormatError("empty point-cloud CSV (missing header)")
    header = [c.strip() for c in rows[0]]
    if header[:3] != ["x", "y", "z"]:
        raise FormatError(f"line 1: expected header x,y,z[,intensity,doppler], got {rows[0]}")
    width = len(header)
    vals = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width:
            raise FormatError(f"line {lineno}: expected {width} fields, got {len(row)}")
        try:
            vals.append([float(x) for x in row])
        except ValueError:
            raise FormatError(f"line {lineno}: non-numeric field in {row}") from None
    a = np.array(vals, dtype=float).reshape(-1, width)
    col = {name: a[:, i] for i, name in enumerate(header)}
    return PointCloud(a[:, :3], col.get("intensity"), col.get("doppler"))


def write_cloud(path, cloud: PointCloud):
    path = Path(path)
    if path.suffix.lower() == ".ply":
        path.write_bytes(cloud_to_ply(cloud))
    else:
        path.write_text(cloud_to_csv(cloud))


def read_cloud(path) -> PointCloud:
    path = Path(path)
    if path.suffix.lower() == ".ply":
        return cloud_from_ply(path.read_bytes())
    return cloud_from_csv(path.read_text())


def cloud_to_ply(cloud: PointCloud) -> bytes:
    props = ["x", "y", "z"]
    cols = [cloud.points[:, 0], cloud.points[:, 1], cloud.points[:, 2]]
    for name in ("intensity", "doppler"):
        val = getattr(cloud, name)
        if val is not None:
            props.append(name)
            cols.append(val)
    header = "ply\nformat binary_little_endian 1.0\n"
    header += f"element vertex {len(cloud)}\n"
    header += "".join(f"property double {p}\n" for p in props)
    header += "end_header\n"
    data = np.column_stack(cols).astype("<f8") if len(cloud) else np.zeros((0, len(props)), "<f8")
    return header.encode("ascii") + data.tobytes()


def cloud_from_ply(blob: bytes) -> PointCloud:
    end = blob.find(b"end_header\n")
    if not blob.startswith(b"ply\n") or end < 0:
        raise FormatError("not a PLY file")
    lines = blob[:end].decode("ascii").splitlines()
    if "format binary_little_endian 1.0" not in lines:
        raise FormatError("only binary_little_endian PLY is supported")
    n = None
    props = []
    for line in lines:
        parts = line.split()
        if parts[:2] == ["element", "vertex"]:
            n = int(parts[2])
        elif parts[:1] == ["property"]:
            if parts[1] not in ("double", "float64"):
                raise FormatError(f"unsupported PLY property type {parts[1]}")
            props.append(parts[2])
    if n is None or props[:3] != ["x", "y", "z"]:
        raise FormatError("PLY must declare a vertex element with x, y, z first")
    data = np.frombuffer(blob, dtype="<f8", offset=end + len(b"end_header\n"))
    if data.size != n * len(props):
        raise FormatError("PLY payload size does not match the header")
    data = data.reshape(n, len(props))
    col = {p: data[:, i].copy() for i, p in enumerate(props)}
    return PointCloud(data[:, :3].copy(), col.get("intensity"), col.get("doppler"))
