"""Model-agnostic evaluation of calibrations.

All comparisons run over a uniform grid of pixel centers so that cameras
expressed in different model families can be scored against each other:

- angular error: mean angle between the two unprojections of each pixel;
- reprojection error: ground-truth unprojections re-projected through the
  estimate, mean pixel distance to the original pixel;
- FoV: border rays through the principal point row/column, summed per side;
- AUC: recall-vs-threshold area, swept over 101 points per threshold;
- edited-image errors: infinity norms of the relative focal and principal
  point offsets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BorderUnprojectionFailed, DimensionMismatch, EmptyInput
from .models import CameraSpec, project_masked, unproject_masked

DEFAULT_AUC_THRESHOLDS = (1.0, 5.0, 10.0)


@dataclass(frozen=True)
class EvalReport:
    """Per-image evaluation record; all fields nonnegative, degrees/pixels/ratios."""

    ae_mean: float
    re_mean: float
    hfov_err: float
    vfov_err: float
    ef: float
    ec: float
    dropped_ae: int = 0
    dropped_re: int = 0

    def to_dict(self) -> dict:
        return {
            "ae_mean_deg": self.ae_mean,
            "re_mean_px": self.re_mean,
            "hfov_err_deg": self.hfov_err,
            "vfov_err_deg": self.vfov_err,
            "ef": self.ef,
            "ec": self.ec,
            "dropped_ae": self.dropped_ae,
            "dropped_re": self.dropped_re,
        }

    CSV_HEADER = "ae_mean_deg,re_mean_px,hfov_err_deg,vfov_err_deg,ef,ec"

    def to_csv_row(self) -> str:
        return (
            f"{self.ae_mean!r},{self.re_mean!r},{self.hfov_err!r},"
            f"{self.vfov_err!r},{self.ef!r},{self.ec!r}"
        )


def _pixel_grid(width: int, height: int, stride: int) -> np.ndarray:
    u = (np.arange(width // stride) + 0.5) * stride
    v = (np.arange(height // stride) + 0.5) * stride
    uu, vv = np.meshgrid(u, v)
    return np.stack([uu.ravel(), vv.ravel()], axis=-1)


def _check_same_size(gt: CameraSpec, est: CameraSpec) -> None:
    if (gt.width, gt.height) != (est.width, est.height):
        raise DimensionMismatch(
            f"image sizes differ: {gt.width}x{gt.height} vs {est.width}x{est.height}"
        )


def angular_error(
    gt: CameraSpec, est: CameraSpec, grid_stride: int = 1
) -> float:
    """Mean angle (degrees) between the two unprojections over the pixel grid.

    Pixels that either camera cannot unproject are dropped from the mean.
    """
    deg, _ = angular_error_counted(gt, est, grid_stride)
    return deg


def angular_error_counted(
    gt: CameraSpec, est: CameraSpec, grid_stride: int = 1
) -> tuple[float, int]:
    """As ``angular_error`` but also reporting the dropped-cell count."""
    _check_same_size(gt, est)
    px = _pixel_grid(gt.width, gt.height, grid_stride)
    p, ok_g = unproject_masked(gt, px)
    q, ok_e = unproject_masked(est, px)
    ok = ok_g & ok_e
    if not ok.any():
        raise EmptyInput("no grid cell is unprojectable under both cameras")
    dots = np.sum(p[ok] * q[ok], axis=-1)
    cross = np.linalg.norm(np.cross(p[ok], q[ok]), axis=-1)
    ang = np.degrees(np.arctan2(cross, dots))
    return float(np.mean(ang)), int(ok.size - np.count_nonzero(ok))


def reproj_error(gt: CameraSpec, est: CameraSpec, grid_stride: int = 1) -> float:
    """Mean pixel distance of ground-truth rays re-projected through ``est``.

    Direction convention: unproject under the ground truth, project under the
    estimate; cells where either step is undefined are dropped.
    """
    pxe, _ = reproj_error_counted(gt, est, grid_stride)
    return pxe


def reproj_error_counted(
    gt: CameraSpec, est: CameraSpec, grid_stride: int = 1
) -> tuple[float, int]:
    """As ``reproj_error`` but also reporting the dropped-cell count."""
    _check_same_size(gt, est)
    px = _pixel_grid(gt.width, gt.height, grid_stride)
    rays, ok_g = unproject_masked(gt, px)
    reproj, ok_e = project_masked(est, rays)
    ok = ok_g & ok_e
    if not ok.any():
        raise EmptyInput("no grid cell survives the reprojection round trip")
    err = np.linalg.norm(reproj[ok] - px[ok], axis=-1)
    return float(np.mean(err)), int(ok.size - np.count_nonzero(ok))


def fov_agnostic(spec: CameraSpec) -> tuple[float, float]:
    """(hFoV, vFoV) in degrees from border rays through the principal point.

    The horizontal FoV sums the angles of the rays at the exact left/right
    image edges (u = 0 and u = W) at v = cy; vertical analogously.
    """
    borders = np.array(
        [
            [0.0, spec.cy],
            [spec.width, spec.cy],
            [spec.cx, 0.0],
            [spec.cx, spec.height],
        ]
    )
    rays, ok = unproject_masked(spec, borders)
    if not ok.all():
        raise BorderUnprojectionFailed(
            "border pixel cannot be unprojected; spec likely violates its clamps"
        )
    angles = np.degrees(np.arccos(np.clip(rays[:, 2], -1.0, 1.0)))
    return float(angles[0] + angles[1]), float(angles[2] + angles[3])


def auc(
    errors: np.ndarray | list[float],
    thresholds: tuple[float, ...] = DEFAULT_AUC_THRESHOLDS,
) -> list[float]:
    """Area under the recall curve (percent) up to each threshold.

    For each threshold t the recall (fraction of errors <= s) is averaged
    over 101 uniform sweep points s in [0, t].
    """
    errors = np.asarray(errors, dtype=np.float64)
    if errors.size == 0:
        raise EmptyInput("auc of an empty error list")
    out = []
    for t in thresholds:
        sweep = np.linspace(0.0, t, 101)
        recall = np.mean(errors[:, None] <= sweep[None, :], axis=0)
        out.append(float(np.mean(recall) * 100.0))
    return out


def edited_errors(gt: CameraSpec, est: CameraSpec) -> tuple[float, float]:
    """Relative focal and principal-point errors for edited-image evaluation.

    ef is the infinity norm of the elementwise relative focal error;
    ec is twice the infinity norm of the principal point offset divided
    elementwise by the image size.
    """
    _check_same_size(gt, est)
    ef = max(
        abs((gt.fx - est.fx) / gt.fx),
        abs((gt.fy - est.fy) / gt.fy),
    )
    ec = 2.0 * max(
        abs((gt.cx - est.cx) / gt.width),
        abs((gt.cy - est.cy) / gt.height),
    )
    return float(ef), float(ec)


def evaluate(
    gt: CameraSpec, est: CameraSpec, grid_stride: int = 1
) -> EvalReport:
    """Full per-image report combining all metrics."""
    ae, ndrop_ae = angular_error_counted(gt, est, grid_stride)
    re, ndrop_re = reproj_error_counted(gt, est, grid_stride)
    h_gt, v_gt = fov_agnostic(gt)
    h_est, v_est = fov_agnostic(est)
    ef, ec = edited_errors(gt, est)
    return EvalReport(
        ae_mean=ae,
        re_mean=re,
        hfov_err=abs(h_gt - h_est),
        vfov_err=abs(v_gt - v_est),
        ef=ef,
        ec=ec,
        dropped_ae=ndrop_ae,
        dropped_re=ndrop_re,
    )

