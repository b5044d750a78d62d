"""File formats: AFF1 binary fields, CSV fields, and intrinsics JSON.

AFF1 layout: the magic bytes ``AFF1``, little-endian u32 width and height,
then width * height * 2 little-endian f32 values (theta_x, theta_y) in
row-major order with the top-left cell first.

The CSV variant is one ``u,v,theta_x,theta_y`` record per grid cell, with an
optional header line; u and v are pixel centers, so a dense field has
u = i + 0.5, v = j + 0.5.

Intrinsics are stored as JSON objects
``{"model": ..., "width": ..., "height": ..., "fx": ..., "fy": ...,
"cx": ..., "cy": ..., "dist": [...]}``.  All JSON emitted here is sorted and
newline-terminated so identical inputs produce identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch
from .fov import FovField
from .models import CameraSpec

_AFF1_MAGIC = b"AFF1"


def write_field(path: str | Path, field: FovField) -> None:
    """Write a field in the AFF1 binary format (values stored as f32)."""
    gh, gw = field.theta.shape[:2]
    payload = field.theta.astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_AFF1_MAGIC)
        fh.write(struct.pack("<II", gw, gh))
        fh.write(payload)


def read_field(path: str | Path) -> FovField:
    """Read a field from an AFF1 file, or from CSV if the magic is absent."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
        if head != _AFF1_MAGIC:
            return _read_field_csv(path)
        gw, gh = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != gw * gh * 2:
        raise DimensionMismatch(
            f"{path}: expected {gw * gh * 2} values, found {data.size}"
        )
    return FovField(theta=data.reshape(gh, gw, 2).astype(np.float64))


def write_field_csv(path: str | Path, field: FovField) -> None:
    gh, gw = field.theta.shape[:2]
    grid = field.pixel_grid()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("u,v,theta_x,theta_y\n")
        for j in range(gh):
            for i in range(gw):
                u, v = (float(x) for x in grid[j, i])
                tx, ty = (float(x) for x in field.theta[j, i])
                fh.write(f"{u!r},{v!r},{tx!r},{ty!r}\n")


def _read_field_csv(path: Path) -> FovField:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.lower().startswith("u,"):
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise DimensionMismatch(f"{path}: malformed CSV record {line!r}")
            rows.append([float(p) for p in parts])
    if not rows:
        raise DimensionMismatch(f"{path}: empty field file")
    data = np.asarray(rows)
    gw = int(round(np.max(data[:, 0]) + 0.5))
    gh = int(round(np.max(data[:, 1]) + 0.5))
    theta = np.full((gh, gw, 2), np.nan)
    cols = np.round(data[:, 0] - 0.5).astype(int)
    lines = np.round(data[:, 1] - 0.5).astype(int)
    theta[lines, cols, 0] = data[:, 2]
    theta[lines, cols, 1] = data[:, 3]
    if np.isnan(theta).any():
        raise DimensionMismatch(f"{path}: CSV field does not cover a full grid")
    return FovField(theta=theta)


def dump_json(obj: dict) -> str:
    """Serialize a JSON object deterministically (sorted keys, newline)."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(path: str | Path, obj: dict) -> None:
    Path(path).write_text(dump_json(obj), encoding="utf-8")


def read_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_spec(path: str | Path, spec: CameraSpec) -> None:
    write_json(path, spec.to_dict())


def read_spec(path: str | Path) -> CameraSpec:
    return CameraSpec.from_dict(read_json(path))
