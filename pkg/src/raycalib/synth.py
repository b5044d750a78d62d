"""Synthetic ground-truth generation: intrinsics samplers, noise, lens mapping.

The dataset samplers draw centered square specs (unit aspect, principal point
at the image center) with the focal length derived from a sampled field of
view rather than sampled directly:

    f = (H / 2) / r_m(FoV / 2)

where r_m is the model's normalized radial profile.  Four dataset kinds are
provided:

    opp   100% pinhole,            FoV ~ U(20, 105)
    opr   100% radial:1,           FoV ~ U(20, 105), khat ~ Nt(0, 0.07, +-0.3)
    opd   50% radial:1 / 50% eucm  (eucm: FoV ~ U(50, 180), alpha ~ U(0.5, 0.8),
                                    beta ~ U(0.5, 2))
    opg   34% pinhole / 33% radial:1 / 33% eucm

The radial:1 coefficient is parameterized as khat = k * H / f, which couples
k and f; the two are resolved jointly by a fixed-point iteration that also
applies the minimum-focal clamp.  Sampled focals are always clamped to the
injectivity limit, so every sampled spec passes ``validate_spec``.

LensFun lens entries (polynomial distortion on top of an ideal fisheye
projection) are mapped to the extended unified model by undistorting a
uniform sensor grid with Newton's method, inverting the ideal projection,
and fitting in focal-normalized units.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DegenerateGeometry, FovOutOfRange, NewtonDivergence, UnsupportedFamily
from .fit import Correspondences, _fit_eucm_full, _refine
from .fov import FovField
from .models import (
    CameraSpec,
    Family,
    ModelId,
    _corner_norm_radius,
    _even_poly,
    _even_poly_deriv,
    _odd_poly_theta,
    _odd_poly_theta_deriv,
    _radial_profile_theta,
    min_focal,
    theta_max,
    unproject_masked,
    validate_spec,
)

_MAX_RESAMPLE = 100


class DatasetKind(Enum):
    OPP = "opp"
    OPR = "opr"
    OPD = "opd"
    OPG = "opg"


@dataclass(frozen=True)
class SamplerConfig:
    kind: DatasetKind
    size: int
    seed: int


# ---------------------------------------------------------------------------
# focal from field of view
# ---------------------------------------------------------------------------


def focal_from_fov(
    model: ModelId, dist: tuple[float, ...] | list[float], fov_deg: float, height: int
) -> float:
    """Focal length placing the vertical half-extent H/2 at polar angle FoV/2.

    For the pinhole family this is the familiar f = (H/2) / tan(FoV/2).

    Raises:
        FovOutOfRange: if the angle is outside the model's representable range.
    """
    if not 0.0 < fov_deg < 360.0:
        raise FovOutOfRange(f"fov must be in (0, 360) degrees, got {fov_deg}")
    half = math.radians(fov_deg) / 2.0
    if half >= math.pi:
        raise FovOutOfRange(f"half angle {half:.3f} rad is not representable")
    probe = CameraSpec(
        model=model,
        fx=1.0,
        fy=1.0,
        cx=0.0,
        cy=0.0,
        dist=tuple(dist),
        width=max(height, 1),
        height=max(height, 1),
    )
    r = float(_radial_profile_theta(probe, np.array(half)))
    if not math.isfinite(r) or r <= 0.0:
        raise FovOutOfRange(f"{model} cannot reach a {fov_deg} degree field of view")
    return (height / 2.0) / r


# ---------------------------------------------------------------------------
# dataset samplers
# ---------------------------------------------------------------------------


def _truncated_normal(rng: np.random.Generator, sigma: float, bound: float) -> float:
    for _ in range(1000):
        x = float(rng.normal(0.0, sigma))
        if -bound <= x <= bound:
            return x
    raise NewtonDivergence("truncated normal rejection failed")  # pragma: no cover


def _centered_square(model: ModelId, f: float, dist: tuple[float, ...], size: int) -> CameraSpec:
    return CameraSpec(
        model=model,
        fx=f,
        fy=f,
        cx=size / 2.0,
        cy=size / 2.0,
        dist=dist,
        width=size,
        height=size,
    )


def _solve_radial1(k_hat: float, fov_deg: float, size: int) -> tuple[float, float]:
    """Joint fixed point for the radial:1 focal and coefficient k = khat * f / H.

    Alternates the focal-from-FoV solve (with the injectivity clamp applied)
    and the coefficient update until the focal is stable to 1e-10 relative.
    """
    model = ModelId(Family.BROWN_CONRADY, 1)
    k = 0.0
    f = focal_from_fov(model, (k,), fov_deg, size)
    for _ in range(20):
        f_new = max(
            focal_from_fov(model, (k,), fov_deg, size),
            min_focal(model, (k,), size, size),
        )
        k = k_hat * f_new / size
        if abs(f_new - f) / f_new < 1e-10:
            f = f_new
            break
        f = f_new
    # a final clamp with headroom keeps validate_spec strict after rounding
    f = max(f, min_focal(model, (k,), size, size) * (1.0 + 1e-9))
    return f, k


class IntrinsicsSampler:
    """Deterministic stream of ground-truth specs for one dataset kind."""

    def __init__(self, cfg: SamplerConfig):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)

    def draw(self) -> CameraSpec:
        for _ in range(_MAX_RESAMPLE):
            spec = self._draw_once()
            if spec is not None and validate_spec(spec).ok:
                return spec
        raise NewtonDivergence("sampler failed to draw a valid spec")  # pragma: no cover

    def draw_many(self, n: int) -> list[CameraSpec]:
        return [self.draw() for _ in range(n)]

    def _draw_once(self) -> CameraSpec | None:
        kind, size, rng = self.cfg.kind, self.cfg.size, self.rng
        if kind is DatasetKind.OPP:
            family = "pinhole"
        elif kind is DatasetKind.OPR:
            family = "radial"
        elif kind is DatasetKind.OPD:
            family = "radial" if rng.uniform() < 0.5 else "eucm"
        else:
            u = rng.uniform()
            family = "pinhole" if u < 0.34 else ("radial" if u < 0.67 else "eucm")

        if family == "pinhole":
            fov = rng.uniform(20.0, 105.0)
            f = focal_from_fov(ModelId(Family.PINHOLE, 0), (), fov, size)
            return _centered_square(ModelId(Family.PINHOLE, 0), f, (), size)
        if family == "radial":
            fov = rng.uniform(20.0, 105.0)
            k_hat = _truncated_normal(rng, 0.07, 0.3)
            f, k = _solve_radial1(k_hat, fov, size)
            return _centered_square(ModelId(Family.BROWN_CONRADY, 1), f, (k,), size)
        fov = rng.uniform(50.0, 180.0)
        alpha = rng.uniform(0.5, 0.8)
        beta = rng.uniform(0.5, 2.0)
        model = ModelId(Family.EUCM, 2)
        try:
            f = focal_from_fov(model, (alpha, beta), fov, size)
        except FovOutOfRange:
            return None
        f = max(f, min_focal(model, (alpha, beta), size, size) * (1.0 + 1e-9))
        return _centered_square(model, f, (alpha, beta), size)


def sample_intrinsics(cfg: SamplerConfig) -> CameraSpec:
    """First spec of the deterministic stream defined by ``cfg``."""
    return IntrinsicsSampler(cfg).draw()


def _radial_slope_floor(spec: CameraSpec) -> float:
    """Smallest slope of the model's scalar radial response over the image.

    Multi-coefficient polynomials with mixed signs can flatten mid-image
    while staying monotone; such near-folding cameras are numerically
    hostile and physically implausible, so samplers reject them.
    """
    fam = spec.model.family
    r_corner = _corner_norm_radius(spec)
    if fam is Family.KANNALA_BRANDT:
        th = np.linspace(0.0, 2.2, 256)
        th = th[_odd_poly_theta(spec.dist, th) <= r_corner]
        return float(np.min(_odd_poly_theta_deriv(spec.dist, th))) if th.size else 1.0
    if fam is Family.BROWN_CONRADY:
        rho = np.linspace(0.0, 3.0, 256)
        rho2 = rho * rho
        dist_r = rho * _even_poly(spec.dist, rho2)
        keep = dist_r <= r_corner
        slope = _even_poly(spec.dist, rho2) + 2.0 * rho2 * _even_poly_deriv(spec.dist, rho2)
        return float(np.min(slope[keep])) if keep.any() else 1.0
    return 1.0


# generic per-model sampler used by tests and benchmarks; families absent from
# the dataset kinds get documented default ranges (wide-angle for fisheye-type
# models), with coefficients normalized by the border radius so that all
# orders contribute comparably at any field of view
def sample_spec_for_model(
    model: ModelId, size: int, rng: np.random.Generator
) -> CameraSpec:
    fam = model.family
    for _ in range(_MAX_RESAMPLE):
        spec: CameraSpec | None = None
        if fam is Family.PINHOLE:
            fov = rng.uniform(20.0, 105.0)
            spec = _centered_square(model, focal_from_fov(model, (), fov, size), (), size)
        elif fam is Family.BROWN_CONRADY:
            fov = rng.uniform(20.0, 105.0)
            k_hat = _truncated_normal(rng, 0.07, 0.3)
            f, k1 = _solve_radial1(k_hat, fov, size)
            # higher orders use the same focal normalization as k1 with
            # rapidly decaying magnitudes, mirroring real lens calibrations
            dist = [k1] + [
                _truncated_normal(rng, 0.07 * 3.0 ** (1 - n), 0.3 * 3.0 ** (1 - n))
                * (f / size) ** (2 * n - 1)
                for n in range(2, model.num_dist + 1)
            ]
            try:
                f = focal_from_fov(model, tuple(dist), fov, size)
            except FovOutOfRange:
                continue
            f_min = min_focal(model, tuple(dist), size, size)
            spec = _centered_square(model, max(f, f_min * (1 + 1e-4)), tuple(dist), size)
        elif fam is Family.KANNALA_BRANDT:
            fov = rng.uniform(50.0, 170.0)
            th_b = math.radians(fov) / 2.0
            dist = tuple(
                _truncated_normal(rng, 0.05 * 2.0 ** (1 - n), 0.2 * 2.0 ** (1 - n))
                / th_b ** (2 * n)
                for n in range(1, model.num_dist + 1)
            )
            try:
                f = focal_from_fov(model, dist, fov, size)
            except FovOutOfRange:
                continue
            spec = _centered_square(model, f, dist, size)
        elif fam is Family.UCM:
            fov = rng.uniform(50.0, 170.0)
            xi = rng.uniform(0.1, 1.5)
            try:
                f = focal_from_fov(model, (xi,), fov, size)
            except FovOutOfRange:
                continue
            spec = _centered_square(model, f, (xi,), size)
        elif fam is Family.EUCM:
            fov = rng.uniform(50.0, 180.0)
            alpha = rng.uniform(0.5, 0.8)
            beta = rng.uniform(0.5, 2.0)
            try:
                f = focal_from_fov(model, (alpha, beta), fov, size)
            except FovOutOfRange:
                continue
            f = max(f, min_focal(model, (alpha, beta), size, size) * (1 + 1e-4))
            spec = _centered_square(model, f, (alpha, beta), size)
        elif fam is Family.DIVISION:
            fov = rng.uniform(50.0, 160.0)
            r_b = math.radians(fov) / 2.0  # border radius is theta-like in scale
            dist = tuple(
                _truncated_normal(rng, 0.05 * 2.0 ** (1 - n), 0.2 * 2.0 ** (1 - n))
                / r_b ** (2 * n)
                for n in range(1, model.num_dist + 1)
            )
            try:
                f = focal_from_fov(model, dist, fov, size)
            except FovOutOfRange:
                continue
            spec = _centered_square(model, f, dist, size)
        else:
            raise UnsupportedFamily(str(fam))

        if spec is None or not validate_spec(spec).ok:
            continue
        if model.num_dist >= 2:
            if fam is Family.DIVISION:
                # probe the forward Newton solve across the image: profiles
                # that flatten mid-image fail to invert and are rejected
                thetas = np.linspace(1e-6, theta_max(spec) - 1e-9, 512)
                if not np.all(np.isfinite(_radial_profile_theta(spec, thetas))):
                    continue
            elif _radial_slope_floor(spec) < 0.15:
                continue
        corners = np.array(
            [[0.0, 0.0], [size, 0.0], [0.0, size], [size, size]], dtype=float
        )
        _, ok = unproject_masked(spec, corners)
        if ok.all():
            return spec
    raise NewtonDivergence(f"could not sample a valid {model} spec")


# ---------------------------------------------------------------------------
# noise injection and edit transforms
# ---------------------------------------------------------------------------


def add_noise(fov_field: FovField, sigma_deg: float, seed: int) -> FovField:
    """Add zero-mean Gaussian noise (std ``sigma_deg``) to each component.

    Deterministic for a fixed seed; cells pushed to |theta| >= pi are redrawn.
    """
    if sigma_deg < 0:
        raise ValueError("sigma must be >= 0")
    if sigma_deg == 0:
        return FovField(theta=fov_field.theta.copy(), stride=fov_field.stride)
    rng = np.random.default_rng(seed)
    sigma = math.radians(sigma_deg)
    theta = fov_field.theta + rng.normal(0.0, sigma, fov_field.theta.shape)
    for _ in range(100):
        bad = np.hypot(theta[..., 0], theta[..., 1]) >= math.pi
        if not bad.any():
            break
        n_bad = int(np.count_nonzero(bad))
        theta[bad] = fov_field.theta[bad] + rng.normal(0.0, sigma, (n_bad, 2))
    return FovField(theta=theta, stride=fov_field.stride)


def apply_edit(
    spec: CameraSpec,
    scale_u: float,
    scale_v: float,
    crop_width: int,
    crop_height: int,
    off_u: float,
    off_v: float,
) -> CameraSpec:
    """Anisotropic resize u' = s_u * u - off_u (v analogously) followed by a crop."""
    return spec.replace(
        fx=spec.fx * scale_u,
        fy=spec.fy * scale_v,
        cx=spec.cx * scale_u - off_u,
        cy=spec.cy * scale_v - off_v,
        width=crop_width,
        height=crop_height,
    )


def sample_edit(spec: CameraSpec, rng: np.random.Generator) -> CameraSpec:
    """Random stretch to a pixel aspect ratio in [0.5, 2] plus a crop of at
    most half the image, re-drawn until the edited spec stays valid."""
    for _ in range(_MAX_RESAMPLE):
        a_t = rng.uniform(0.5, 2.0)
        su, sv = 1.0 / math.sqrt(a_t), math.sqrt(a_t)
        ws, hs = max(2, round(su * spec.width)), max(2, round(sv * spec.height))
        w2 = max(2, round(rng.uniform(0.5, 1.0) * ws))
        h2 = max(2, round(rng.uniform(0.5, 1.0) * hs))
        off_u = float(rng.integers(0, ws - w2 + 1))
        off_v = float(rng.integers(0, hs - h2 + 1))
        su_eff, sv_eff = ws / spec.width, hs / spec.height
        edited = apply_edit(spec, su_eff, sv_eff, w2, h2, off_u, off_v)
        if validate_spec(edited).ok:
            return edited
    raise NewtonDivergence("could not sample a valid edit")  # pragma: no cover


# ---------------------------------------------------------------------------
# LensFun entries -> extended unified model
# ---------------------------------------------------------------------------

_POLY_KINDS = ("poly3", "poly5", "ptlens")
_PROJECTIONS = ("equidistant", "equisolid", "orthographic", "stereographic")
_FISHEYE_KINDS = tuple(f"fisheye_{p}" for p in _PROJECTIONS)


@dataclass(frozen=True)
class LensfunEntry:
    """One lens calibration: a distortion polynomial over an ideal fisheye.

    ``model_kind`` is either a polynomial kind (poly3 / poly5 / ptlens), in
    which case ``projection`` names the underlying fisheye geometry
    (defaulting to equidistant, the plain LensFun "fisheye" type), or one of
    the ideal fisheye_* kinds with no polynomial.  The polynomial maps
    undistorted to distorted radii, both normalized by half the smaller
    sensor dimension:

        poly3:  rd = ru * (1 - k1 + k1 ru^2)
        poly5:  rd = ru * (1 + k1 ru^2 + k2 ru^4)
        ptlens: rd = ru * (a ru^3 + b ru^2 + c ru + 1 - a - b - c)
    """

    model_kind: str
    coefficients: tuple[float, ...]
    focal_mm: float
    sensor_width_mm: float
    sensor_height_mm: float
    projection: str = "equidistant"
    fov_deg: float = 180.0  # rated angular extent of the image circle

    def __post_init__(self) -> None:
        if self.model_kind not in _POLY_KINDS + _FISHEYE_KINDS:
            raise UnsupportedFamily(f"unsupported LensFun model kind {self.model_kind!r}")
        expected = {"poly3": 1, "poly5": 2, "ptlens": 3}.get(self.model_kind, 0)
        if self.model_kind in _POLY_KINDS and len(self.coefficients) != expected:
            raise ValueError(
                f"{self.model_kind} takes {expected} coefficients, "
                f"got {len(self.coefficients)}"
            )
        proj = self.projection
        if self.model_kind in _FISHEYE_KINDS:
            proj = self.model_kind.removeprefix("fisheye_")
        if proj not in _PROJECTIONS:
            raise ValueError(f"unknown fisheye projection {self.projection!r}")
        object.__setattr__(self, "projection", proj)
        object.__setattr__(
            self, "coefficients", tuple(float(c) for c in self.coefficients)
        )

    @classmethod
    def from_dict(cls, data: dict) -> "LensfunEntry":
        kwargs = dict(
            model_kind=data["model_kind"],
            coefficients=tuple(data.get("coefficients", ())),
            focal_mm=float(data["focal_mm"]),
            sensor_width_mm=float(data["sensor_width_mm"]),
            sensor_height_mm=float(data["sensor_height_mm"]),
        )
        if "projection" in data:
            kwargs["projection"] = data["projection"]
        if "fov_deg" in data:
            kwargs["fov_deg"] = float(data["fov_deg"])
        return cls(**kwargs)


def _distort_radius(entry: LensfunEntry, ru: np.ndarray) -> np.ndarray:
    k = entry.coefficients
    if entry.model_kind == "poly3":
        return ru * (1.0 - k[0] + k[0] * ru * ru)
    if entry.model_kind == "poly5":
        return ru * (1.0 + k[0] * ru * ru + k[1] * ru**4)
    if entry.model_kind == "ptlens":
        a, b, c = k
        return ru * (a * ru**3 + b * ru * ru + c * ru + 1.0 - a - b - c)
    return ru  # ideal fisheye kinds carry no polynomial


def _distort_radius_deriv(entry: LensfunEntry, ru: np.ndarray) -> np.ndarray:
    k = entry.coefficients
    if entry.model_kind == "poly3":
        return 1.0 - k[0] + 3.0 * k[0] * ru * ru
    if entry.model_kind == "poly5":
        return 1.0 + 3.0 * k[0] * ru * ru + 5.0 * k[1] * ru**4
    if entry.model_kind == "ptlens":
        a, b, c = k
        return 4.0 * a * ru**3 + 3.0 * b * ru * ru + 2.0 * c * ru + 1.0 - a - b - c
    return np.ones_like(ru)


def _invert_fisheye(projection: str, r_over_f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Polar angle of the ideal projection at normalized radius r/f."""
    if projection == "equidistant":
        theta = r_over_f
        ok = theta < math.pi
    elif projection == "equisolid":
        arg = r_over_f / 2.0
        ok = arg <= 1.0
        theta = 2.0 * np.arcsin(np.minimum(arg, 1.0))
    elif projection == "orthographic":
        ok = r_over_f <= 1.0
        theta = np.arcsin(np.minimum(r_over_f, 1.0))
    else:  # stereographic
        theta = 2.0 * np.arctan(r_over_f / 2.0)
        ok = np.ones_like(theta, dtype=bool)
    return theta, ok & (theta < math.pi - 1e-9)


def lensfun_to_eucm(
    entry: LensfunEntry, grid_stride: int = 1
) -> tuple[float, float, float, float]:
    """Map a LensFun entry to (alpha, beta, focal_mm, residual_deg).

    A uniform sensor grid is undistorted with Newton's method (tolerance
    1e-10, at most 50 iterations), the ideal fisheye projection is inverted
    to obtain rays, and the extended unified model is fitted to the
    (normalized coordinate, ray) correspondences.  The returned focal is the
    fitted generalized focal scaled back to millimetres; the residual is the
    mean angle between the fitted model's unprojections and the ideal rays.
    """
    w, h = entry.sensor_width_mm, entry.sensor_height_mm
    n_u = max(4, int(256 / grid_stride))
    n_v = max(4, int(round(n_u * h / w)))
    xs = (np.arange(n_u) + 0.5) / n_u * w - w / 2.0
    ys = (np.arange(n_v) + 0.5) / n_v * h - h / 2.0
    gx, gy = np.meshgrid(xs, ys)
    gx, gy = gx.ravel(), gy.ravel()

    norm_unit = min(w, h) / 2.0
    rd = np.hypot(gx, gy) / norm_unit
    keep = rd > 1e-9
    gx, gy, rd = gx[keep], gy[keep], rd[keep]

    # undistort: solve distort(ru) = rd
    ru = rd.copy()
    done = np.zeros(ru.shape, dtype=bool)
    for _ in range(50):
        g = _distort_radius(entry, ru) - rd
        gp = _distort_radius_deriv(entry, ru)
        step = g / np.where(np.abs(gp) > 1e-300, gp, 1.0)
        ru = np.maximum(ru - step, 0.0)
        done |= np.abs(step) <= 1e-10
        if done.all():
            break
    gx_u = gx * np.where(rd > 0, ru / rd, 1.0)
    gy_u = gy * np.where(rd > 0, ru / rd, 1.0)

    theta, ok = _invert_fisheye(
        entry.projection, np.hypot(gx_u, gy_u) / entry.focal_mm
    )
    # cells beyond the rated image circle see nothing; drop them
    good = done & ok & (theta <= math.radians(entry.fov_deg) / 2.0 + 1e-9)
    if np.count_nonzero(good) < 8:
        raise DegenerateGeometry("too few valid sensor cells to fit the lens")

    az_x = gx_u[good] / np.hypot(gx_u[good], gy_u[good])
    az_y = gy_u[good] / np.hypot(gx_u[good], gy_u[good])
    th = theta[good]
    rays = np.stack([np.sin(th) * az_x, np.sin(th) * az_y, np.cos(th)], axis=-1)

    # normalized (distorted) image coordinates, origin at the sensor center
    coords = np.stack([gx[good], gy[good]], axis=-1) / entry.focal_mm
    corrs = Correspondences(coords, rays)
    spec0, _ = _fit_eucm_full(corrs, 1.0, (0.0, 0.0), (1, 1))
    refined = _refine(spec0, corrs, free=np.array([0, 1, 4, 5]))
    spec = refined.spec

    q, ok_q = unproject_masked(spec, coords)
    dots = np.clip(np.sum(q[ok_q] * rays[ok_q], axis=-1), -1.0, 1.0)
    residual = float(np.degrees(np.mean(np.arccos(dots))))
    alpha, beta = spec.dist
    f_mm = 0.5 * (spec.fx + spec.fy) * entry.focal_mm
    return float(alpha), float(beta), f_mm, residual


def parse_lensfun_xml(text: str) -> list[LensfunEntry]:
    """Extract supported entries from LensFun XML ``<lens>`` elements.

    Only the fields needed for the supported model kinds are read: the lens
    ``<type>`` (fisheye geometries), ``<cropfactor>`` (for the sensor size,
    relative to full frame 36 x 24 mm) and ``<distortion>`` calibration rows.
    """
    root = ET.fromstring(text)
    lenses = root.iter("lens") if root.tag != "lens" else [root]
    type_map = {
        "fisheye": "equidistant",
        "fisheye-equisolid": "equisolid",
        "fisheye-orthographic": "orthographic",
        "fisheye-stereographic": "stereographic",
        "equisolid": "equisolid",
        "orthographic": "orthographic",
        "stereographic": "stereographic",
    }
    out: list[LensfunEntry] = []
    for lens in lenses:
        lens_type = (lens.findtext("type") or "").strip()
        if lens_type not in type_map:
            continue
        projection = type_map[lens_type]
        crop = float(lens.findtext("cropfactor") or 1.0)
        w_mm, h_mm = 36.0 / crop, 24.0 / crop
        rows = lens.findall(".//distortion")
        if not rows:
            out.append(
                LensfunEntry(
                    model_kind=f"fisheye_{projection}",
                    coefficients=(),
                    focal_mm=float(lens.findtext("focal") or 0.0) or w_mm / 2,
                    sensor_width_mm=w_mm,
                    sensor_height_mm=h_mm,
                    projection=projection,
                )
            )
            continue
        for row in rows:
            kind = row.get("model", "")
            if kind not in _POLY_KINDS:
                continue
            if kind == "poly3":
                coeffs = (float(row.get("k1", 0.0)),)
            elif kind == "poly5":
                coeffs = (float(row.get("k1", 0.0)), float(row.get("k2", 0.0)))
            else:
                coeffs = (
                    float(row.get("a", 0.0)),
                    float(row.get("b", 0.0)),
                    float(row.get("c", 0.0)),
                )
            out.append(
                LensfunEntry(
                    model_kind=kind,
                    coefficients=coeffs,
                    focal_mm=float(row.get("real-focal") or row.get("focal") or 0.0),
                    sensor_width_mm=w_mm,
                    sensor_height_mm=h_mm,
                    projection=projection,
                )
            )
    return out


def load_lensfun_entry(path: str | Path) -> LensfunEntry:
    """Load one entry from minimal JSON or LensFun XML."""
    import json

    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("<"):
        entries = parse_lensfun_xml(text)
        if not entries:
            raise UnsupportedFamily(f"{path}: no supported lens entry found")
        return entries[0]
    return LensfunEntry.from_dict(json.loads(text))
