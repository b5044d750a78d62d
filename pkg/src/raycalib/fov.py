"""Tangent-plane FoV fields and their bijection with unit ray directions.

A FoV field stores, per pixel, the 2-vector theta = (theta_x, theta_y) of the
pixel's viewing ray expressed in the tangent plane of the unit sphere at the
optical axis z1 = [0, 0, 1].  The maps between rays and tangent vectors are

    log:  theta = (t / sin t) * (X, Y),   t = arccos(Z)
    exp:  p = [(sin t / t) * theta_x, (sin t / t) * theta_y, cos t],  t = |theta|

so |theta| equals the polar angle of the ray exactly.  Both maps switch to
their series limit below t = 1e-6, where the ratio t/sin(t) is 1 to double
precision.  The antipode (Z = -1) is excluded from the log map and |theta|
must stay below pi for the exp map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AntipodalRay,
    DimensionMismatch,
    NonInvertiblePixel,
    ThetaOutOfDomain,
)
from .models import CameraSpec, unproject_masked

_SERIES_CUTOVER = 1e-6


def log_map(rays: np.ndarray) -> np.ndarray:
    """Map unit rays (..., 3) to tangent-plane 2-vectors (..., 2).

    Raises:
        AntipodalRay: if any ray has Z = -1 within 1e-12.
    """
    rays = np.asarray(rays, dtype=np.float64)
    z = rays[..., 2]
    if np.any(z <= -1.0 + 1e-12):
        raise AntipodalRay("log map undefined at [0, 0, -1]")
    sin_theta = np.hypot(rays[..., 0], rays[..., 1])
    # atan2 keeps full precision near the axis, where arccos(z) loses
    # ~eps/theta absolute accuracy; both equal the polar angle
    theta = np.arctan2(sin_theta, z)
    small = theta < _SERIES_CUTOVER
    scale = np.where(
        small, 1.0, theta / np.where(small, 1.0, np.maximum(sin_theta, 1e-300))
    )
    return rays[..., :2] * scale[..., None]


def exp_map(theta2: np.ndarray) -> np.ndarray:
    """Map tangent-plane 2-vectors (..., 2) to unit rays (..., 3).

    Raises:
        ThetaOutOfDomain: if any |theta| >= pi.
    """
    theta2 = np.asarray(theta2, dtype=np.float64)
    t = np.hypot(theta2[..., 0], theta2[..., 1])
    if np.any(t >= np.pi):
        raise ThetaOutOfDomain("|theta| must be < pi")
    small = t < _SERIES_CUTOVER
    sinc = np.where(small, 1.0, np.sin(t) / np.where(small, 1.0, np.maximum(t, 1e-300)))
    rays = np.concatenate(
        [theta2 * sinc[..., None], np.cos(t)[..., None]], axis=-1
    )
    # the small-angle branch is off unit norm by O(t^4); renormalize once
    return rays / np.linalg.norm(rays, axis=-1, keepdims=True)


@dataclass(frozen=True)
class FovField:
    """Dense grid of tangent-plane 2-vectors, one per sampled pixel center.

    ``theta`` has shape (grid_h, grid_w, 2), row-major with the top-left cell
    first.  Cell (j, i) corresponds to pixel center ((i + 0.5) * stride,
    (j + 0.5) * stride); a stride of 1 (the default and the only value used by
    the file formats) makes the grid per-pixel for a width x height image.
    """

    theta: np.ndarray
    stride: int = 1

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta, dtype=np.float64)
        if theta.ndim != 3 or theta.shape[-1] != 2:
            raise DimensionMismatch(f"theta must be (h, w, 2), got {theta.shape}")
        object.__setattr__(self, "theta", theta)

    @property
    def grid_height(self) -> int:
        return self.theta.shape[0]

    @property
    def grid_width(self) -> int:
        return self.theta.shape[1]

    @property
    def width(self) -> int:
        return self.grid_width * self.stride

    @property
    def height(self) -> int:
        return self.grid_height * self.stride

    def pixel_grid(self) -> np.ndarray:
        """(h, w, 2) array of the pixel-center coordinates of each cell."""
        gh, gw = self.theta.shape[:2]
        u = (np.arange(gw) + 0.5) * self.stride
        v = (np.arange(gh) + 0.5) * self.stride
        uu, vv = np.meshgrid(u, v)
        return np.stack([uu, vv], axis=-1)


@dataclass(frozen=True)
class RayGrid:
    """Dense grid of unit ray directions, shape (h, w, 3)."""

    rays: np.ndarray
    stride: int = 1

    def __post_init__(self) -> None:
        rays = np.asarray(self.rays, dtype=np.float64)
        if rays.ndim != 3 or rays.shape[-1] != 3:
            raise DimensionMismatch(f"rays must be (h, w, 3), got {rays.shape}")
        object.__setattr__(self, "rays", rays)

    @property
    def width(self) -> int:
        return self.rays.shape[1] * self.stride

    @property
    def height(self) -> int:
        return self.rays.shape[0] * self.stride


def field_from_spec(spec: CameraSpec, stride: int = 1) -> FovField:
    """Ground-truth FoV field of a camera, sampled at pixel centers.

    With ``stride`` > 1 every block of stride x stride pixels contributes one
    cell at its center, so the grid covers the same image extent at a coarser
    pitch.

    Raises:
        NonInvertiblePixel: if any sampled pixel cannot be unprojected.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    gw = spec.width // stride
    gh = spec.height // stride
    u = (np.arange(gw) + 0.5) * stride
    v = (np.arange(gh) + 0.5) * stride
    uu, vv = np.meshgrid(u, v)
    px = np.stack([uu, vv], axis=-1)
    rays, ok = unproject_masked(spec, px.reshape(-1, 2))
    if not ok.all():
        n_bad = int(ok.size - np.count_nonzero(ok))
        raise NonInvertiblePixel(f"{n_bad} grid pixels not invertible for {spec.model}")
    theta = log_map(rays).reshape(gh, gw, 2)
    return FovField(theta=theta, stride=stride)


def rays_from_field(field: FovField) -> RayGrid:
    """Elementwise exp map of a field's tangent vectors."""
    return RayGrid(rays=exp_map(field.theta), stride=field.stride)


def field_l1(a: FovField, b: FovField) -> float:
    """Mean elementwise L1 distance between two fields, in radians."""
    if a.theta.shape != b.theta.shape:
        raise DimensionMismatch(
            f"field shapes differ: {a.theta.shape} vs {b.theta.shape}"
        )
    return float(np.mean(np.sum(np.abs(a.theta - b.theta), axis=-1)))
