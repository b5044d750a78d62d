"""Camera model families: projection, unprojection and physical-validity limits.

Six families are supported, identified by a model string:

    pinhole                 perspective projection
    radial:N    (N = 1..4)  Brown-Conrady, radial polynomial in (R/Z)^2
    kb:N        (N = 1..4)  Kannala-Brandt, odd polynomial in the polar angle
    ucm                     unified camera model, dist = [xi]
    eucm                    extended unified camera model, dist = [alpha, beta]
    division:N  (N = 1..3)  backward model, psi(r) = 1 + sum_n k_n r^(2n)

All forward models project a unit ray p = [X, Y, Z] as

    [u, v] = fx * phi(R, Z) * [X, (fy/fx) * Y] + [cx, cy],    R = hypot(X, Y)

with the family-specific radial function phi.  The division model is defined
backwards, by its unprojection [X, Y, Z] ~ [m_x, m_y, psi(r)] with
m = ((u - cx)/fx, (v - cy)/fy) and r = |m|; its forward map inverts that
relation with a Newton solve (tolerance 1e-10 on the normalized radius,
at most 20 iterations).  Brown-Conrady and Kannala-Brandt unprojections are
Newton-inverted under the same tolerances, starting from the undistorted
solution.

Pixel coordinates live in the continuous domain [0, W] x [0, H]; sampled
grids use pixel centers (i + 0.5, j + 0.5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import NonInvertiblePixel, RayOutsideDomain, UnsupportedFamily

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 20

# slack added to the valid-cone bound so that rays unprojected from pixels
# exactly on the image border re-project without tripping the domain check
_THETA_MAX_SLACK = 1e-9


class Family(Enum):
    PINHOLE = "pinhole"
    BROWN_CONRADY = "radial"
    KANNALA_BRANDT = "kb"
    UCM = "ucm"
    EUCM = "eucm"
    DIVISION = "division"


# allowed number of distortion coefficients per family
_DIST_RANGE: dict[Family, tuple[int, int]] = {
    Family.PINHOLE: (0, 0),
    Family.BROWN_CONRADY: (1, 4),
    Family.KANNALA_BRANDT: (1, 4),
    Family.UCM: (1, 1),
    Family.EUCM: (2, 2),
    Family.DIVISION: (1, 3),
}

_VARIABLE_DIST = {Family.BROWN_CONRADY, Family.KANNALA_BRANDT, Family.DIVISION}


@dataclass(frozen=True)
class ModelId:
    """A model family plus its number of distortion coefficients."""

    family: Family
    num_dist: int

    def __post_init__(self) -> None:
        lo, hi = _DIST_RANGE[self.family]
        if not lo <= self.num_dist <= hi:
            raise ValueError(
                f"{self.family.value} supports {lo}..{hi} distortion "
                f"coefficients, got {self.num_dist}"
            )

    def __str__(self) -> str:
        if self.family in _VARIABLE_DIST:
            return f"{self.family.value}:{self.num_dist}"
        return self.family.value


def parse_model(text: str) -> ModelId:
    """Parse a model string such as ``pinhole``, ``kb:4`` or ``division:2``."""
    name, sep, count = text.strip().partition(":")
    try:
        family = Family(name)
    except ValueError:
        raise ValueError(f"unknown camera model {text!r}") from None
    if family in _VARIABLE_DIST:
        if not sep:
            raise ValueError(f"{name} requires a coefficient count, e.g. {name}:2")
        num = int(count)
    else:
        if sep:
            raise ValueError(f"{name} does not take a coefficient count")
        num = _DIST_RANGE[family][0]
    return ModelId(family, num)


@dataclass(frozen=True)
class CameraSpec:
    """Intrinsic parameters of one camera.

    ``dist`` holds the family's coefficients in canonical order: k_1..k_N for
    radial/kb/division, [xi] for ucm, [alpha, beta] for eucm.
    """

    model: ModelId
    fx: float
    fy: float
    cx: float
    cy: float
    dist: tuple[float, ...]
    width: int
    height: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "dist", tuple(float(k) for k in self.dist))
        if len(self.dist) != self.model.num_dist:
            raise ValueError(
                f"{self.model} expects {self.model.num_dist} coefficients, "
                f"got {len(self.dist)}"
            )

    @property
    def aspect(self) -> float:
        """Pixel aspect ratio a = fy / fx."""
        return self.fy / self.fx

    @property
    def principal_point(self) -> tuple[float, float]:
        return (self.cx, self.cy)

    def replace(self, **changes) -> "CameraSpec":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "model": str(self.model),
            "width": self.width,
            "height": self.height,
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "dist": list(self.dist),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CameraSpec":
        return cls(
            model=parse_model(data["model"]),
            fx=float(data["fx"]),
            fy=float(data["fy"]),
            cx=float(data["cx"]),
            cy=float(data["cy"]),
            dist=tuple(float(k) for k in data.get("dist", [])),
            width=int(data["width"]),
            height=int(data["height"]),
        )


# ---------------------------------------------------------------------------
# polynomial helpers (coefficients k_1..k_N over even powers of the argument)
# ---------------------------------------------------------------------------


def _even_poly(ks: tuple[float, ...], x2: np.ndarray) -> np.ndarray:
    """1 + k_1 x^2 + k_2 x^4 + ... evaluated from x^2 (Horner)."""
    acc = np.zeros_like(x2)
    for k in reversed(ks):
        acc = (acc + k) * x2
    return 1.0 + acc


def _even_poly_deriv(ks: tuple[float, ...], x2: np.ndarray) -> np.ndarray:
    """d/dx2 of ``_even_poly``: sum_n n k_n x^(2n-2)."""
    acc = np.zeros_like(x2)
    for n in range(len(ks), 0, -1):
        acc = acc * x2 + n * ks[n - 1]
    return acc


def _odd_poly_theta(ks: tuple[float, ...], theta: np.ndarray) -> np.ndarray:
    """theta + k_1 theta^3 + ... + k_N theta^(2N+1)."""
    t2 = theta * theta
    return theta * _even_poly(ks, t2)


def _odd_poly_theta_deriv(ks: tuple[float, ...], theta: np.ndarray) -> np.ndarray:
    """1 + 3 k_1 theta^2 + ... + (2N+1) k_N theta^(2N)."""
    t2 = theta * theta
    acc = np.zeros_like(theta)
    for n in range(len(ks), 0, -1):
        acc = acc * t2 + (2 * n + 1) * ks[n - 1]
    return 1.0 + acc * t2


@lru_cache(maxsize=65536)
def _first_positive_root_even(coeffs: tuple[float, ...]) -> float:
    """Smallest positive x with 1 + sum_n coeffs[n-1] x^(2n) = 0, or inf."""
    if all(c >= 0 for c in coeffs):
        return math.inf
    # roots in y = x^2 of 1 + sum coeffs[n-1] y^n
    roots = np.roots(list(reversed([1.0, *coeffs])))
    real = roots[np.abs(roots.imag) < 1e-9].real
    pos = real[real > 0]
    if pos.size == 0:
        return math.inf
    return float(np.sqrt(pos.min()))


def _stationary_radius(ks: tuple[float, ...]) -> float:
    """First stationary point of x * (1 + sum k_n x^(2n)): the fold of forward
    radial polynomials (Brown-Conrady in rho = R/Z, Kannala-Brandt in theta)."""
    return _first_positive_root_even(tuple((2 * n + 1) * k for n, k in enumerate(ks, 1)))


def _division_fold_radius(ks: tuple[float, ...]) -> float:
    """First stationary point of atan2(r, psi(r)): where psi - r psi' hits 0."""
    return _first_positive_root_even(tuple((1 - 2 * n) * k for n, k in enumerate(ks, 1)))


# ---------------------------------------------------------------------------
# normalized radial profiles r_m(theta) = phi(sin t, cos t) * sin t
# ---------------------------------------------------------------------------


def _division_psi(spec: CameraSpec, r: np.ndarray) -> np.ndarray:
    return _even_poly(spec.dist, r * r)


def _radial_profile_theta(spec: CameraSpec, theta: np.ndarray) -> np.ndarray:
    """Normalized image radius |m| reached at polar angle theta (NaN = invalid)."""
    fam = spec.model.family
    theta = np.asarray(theta, dtype=np.float64)
    s, c = np.sin(theta), np.cos(theta)
    if fam is Family.PINHOLE:
        return np.where(c > 1e-12, s / np.where(c > 1e-12, c, 1.0), np.nan)
    if fam is Family.BROWN_CONRADY:
        rho = np.where(c > 1e-12, s / np.where(c > 1e-12, c, 1.0), np.nan)
        return rho * _even_poly(spec.dist, rho * rho)
    if fam is Family.KANNALA_BRANDT:
        return _odd_poly_theta(spec.dist, theta)
    if fam is Family.UCM:
        xi = spec.dist[0]
        den = xi + c
        return np.where(den > 1e-12, s / np.where(den > 1e-12, den, 1.0), np.nan)
    if fam is Family.EUCM:
        alpha, beta = spec.dist
        den = alpha * np.sqrt(beta * s * s + c * c) + (1.0 - alpha) * c
        return np.where(den > 1e-12, s / np.where(den > 1e-12, den, 1.0), np.nan)
    if fam is Family.DIVISION:
        r, ok = _division_forward_radius(spec, s, c)
        return np.where(ok, r, np.nan)
    raise UnsupportedFamily(str(fam))


def radial_profile(spec: CameraSpec, theta: np.ndarray) -> np.ndarray:
    """Projected pixel radius |x - c| at polar angle theta, along the x axis.

    Invalid angles (outside the model's mathematical domain) come back NaN.
    No injectivity check is applied, which makes this the tool for *checking*
    injectivity: the projection is injective over a disc exactly when the
    profile is strictly increasing up to the disc radius.
    """
    return spec.fx * _radial_profile_theta(spec, np.asarray(theta, dtype=np.float64))


def _corner_norm_radius(spec: CameraSpec) -> float:
    """Max normalized radius |m| over the four image corners."""
    a = spec.aspect
    us = np.array([0.0, spec.width, 0.0, spec.width])
    vs = np.array([0.0, 0.0, spec.height, spec.height])
    mx = (us - spec.cx) / spec.fx
    my = (vs - spec.cy) / (a * spec.fx)
    return float(np.max(np.hypot(mx, my)))


@lru_cache(maxsize=4096)
def theta_max(spec: CameraSpec) -> float:
    """Largest polar angle whose projection stays within the image corner radius.

    Computed numerically from the radial profile: the profile is scanned for
    its monotone prefix and inverted at the corner radius by bisection.  If
    the profile folds before reaching the corner, the fold angle is returned
    instead.  A slack of 1e-9 rad keeps border pixels round-trippable.
    """
    fam = spec.model.family
    r_corner = _corner_norm_radius(spec)

    if fam is Family.DIVISION:
        # invert in radius space, where the profile is theta(r) = atan2(r, psi(r))
        r_end = min(r_corner, _division_fold_radius(spec.dist))
        psi = float(_division_psi(spec, np.array(r_end)))
        return math.atan2(r_end, psi) + _THETA_MAX_SLACK

    if fam in (Family.PINHOLE, Family.BROWN_CONRADY):
        dom_end = math.pi / 2 - 1e-9
    else:
        dom_end = math.pi - 1e-9

    grid = np.linspace(1e-9, dom_end, 4097)
    prof = _radial_profile_theta(spec, grid)
    bad = ~np.isfinite(prof)
    bad[1:] |= np.diff(prof) <= 0
    if bad.any():
        end = int(np.argmax(bad))
        if end == 0:
            return _THETA_MAX_SLACK
        grid, prof = grid[:end], prof[:end]
    if prof[-1] <= r_corner:
        return float(grid[-1]) + _THETA_MAX_SLACK

    lo, hi = 0.0, float(grid[np.argmax(prof > r_corner)])
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _radial_profile_theta(spec, np.array(mid)) > r_corner:
            hi = mid
        else:
            lo = mid
    return hi + _THETA_MAX_SLACK


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------


def _division_forward_radius(
    spec: CameraSpec, R: np.ndarray, Z: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Solve atan2(r, psi(r)) = atan2(R, Z) for the normalized radius r.

    The angle profile is strictly monotone up to the model's fold radius, so
    a Newton iteration clipped into that bracket converges from the
    undistorted (pinhole) start.  Returns (r, converged).
    """
    ks = spec.dist
    theta = np.arctan2(R, Z)
    r_fold = _division_fold_radius(ks)
    if math.isfinite(r_fold):
        hi = 0.999999 * r_fold
    else:
        # no fold: the angle profile is globally monotone; bound the search
        # by growing an upper bracket past every requested angle
        hi_s = 2.0 * float(np.max(theta)) + 1.0
        for _ in range(200):
            if math.atan2(hi_s, float(_even_poly(ks, np.array(hi_s**2)))) >= np.max(theta):
                break
            hi_s *= 2.0
        hi = hi_s
    r = np.clip(np.where(Z > 0.2, R / np.where(Z > 0.2, Z, 1.0), theta), 0.0, hi)
    converged = np.zeros(r.shape, dtype=bool)
    for _ in range(NEWTON_MAX_ITER):
        r2 = r * r
        psi = _even_poly(ks, r2)
        h = np.arctan2(r, psi) - theta
        # d/dr atan2(r, psi) = (psi - r psi') / (r^2 + psi^2), positive on the
        # monotone domain
        hp = (psi - 2.0 * r2 * _even_poly_deriv(ks, r2)) / (r2 + psi * psi)
        step = h / np.where(np.abs(hp) > 1e-300, hp, 1.0)
        r = np.clip(r - step, 0.0, hi)
        converged |= np.abs(step) <= NEWTON_TOL
        if converged.all():
            break
    return r, converged & np.isfinite(r)


def _project_arrays(
    spec: CameraSpec, rays: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    fam = spec.model.family
    X, Y, Z = rays[..., 0], rays[..., 1], rays[..., 2]
    R = np.hypot(X, Y)
    theta = np.arctan2(R, Z)
    valid = theta <= theta_max(spec)

    a = spec.aspect
    if fam in (Family.PINHOLE, Family.BROWN_CONRADY):
        safe_z = np.where(Z > 1e-12, Z, 1.0)
        scale = 1.0 / safe_z
        if fam is Family.BROWN_CONRADY:
            rho2 = (R / safe_z) ** 2
            scale = scale * _even_poly(spec.dist, rho2)
        valid &= Z > 1e-12
    elif fam is Family.KANNALA_BRANDT:
        poly = _odd_poly_theta(spec.dist, theta)
        scale = np.where(R > 1e-12, poly / np.where(R > 1e-12, R, 1.0), 1.0)
    elif fam is Family.UCM:
        xi = spec.dist[0]
        d = np.sqrt(X * X + Y * Y + Z * Z)
        den = xi * d + Z
        valid &= den > 1e-12
        scale = 1.0 / np.where(den > 1e-12, den, 1.0)
    elif fam is Family.EUCM:
        alpha, beta = spec.dist
        rho = np.sqrt(beta * R * R + Z * Z)
        den = alpha * rho + (1.0 - alpha) * Z
        valid &= den > 1e-12
        scale = 1.0 / np.where(den > 1e-12, den, 1.0)
    elif fam is Family.DIVISION:
        r, ok = _division_forward_radius(spec, R, Z)
        valid &= ok
        scale = np.where(R > 1e-12, r / np.where(R > 1e-12, R, 1.0), 1.0)
    else:
        raise UnsupportedFamily(str(fam))

    u = spec.fx * scale * X + spec.cx
    v = spec.fx * a * scale * Y + spec.cy
    return np.stack([u, v], axis=-1), valid & np.isfinite(u) & np.isfinite(v)


def project_masked(spec: CameraSpec, rays: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project unit rays, returning (pixels, valid_mask) without raising.

    Args:
        rays: (..., 3) unit ray directions.

    Returns:
        pixels (..., 2) and a boolean mask flagging rays inside the model's
        valid cone whose projection succeeded.  Pixel values for invalid rays
        are unspecified.
    """
    rays = np.asarray(rays, dtype=np.float64)
    return _project_arrays(spec, rays)


def project(spec: CameraSpec, rays: np.ndarray) -> np.ndarray:
    """Project unit rays to pixel coordinates.

    Raises:
        RayOutsideDomain: if any ray exceeds the valid cone of ``spec`` or a
            Newton inversion fails to converge.
    """
    rays = np.asarray(rays, dtype=np.float64)
    px, ok = _project_arrays(spec, rays)
    if not ok.all():
        n_bad = int(np.size(ok) - np.count_nonzero(ok))
        raise RayOutsideDomain(f"{n_bad} of {np.size(ok)} rays outside the valid cone")
    return px


# ---------------------------------------------------------------------------
# unprojection
# ---------------------------------------------------------------------------


def _bc_undistort_radius(
    dist: tuple[float, ...], r: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Solve rho * psi(rho) = r for the undistorted radial coordinate."""
    rho_fold = _stationary_radius(dist)
    hi = min(rho_fold, 1e9)
    rho = np.minimum(r, 0.999 * hi) if math.isfinite(rho_fold) else r.copy()
    done = np.zeros(rho.shape, dtype=bool)
    for _ in range(NEWTON_MAX_ITER):
        rho2 = rho * rho
        h = rho * _even_poly(dist, rho2) - r
        hp = _even_poly(dist, rho2) + 2.0 * rho2 * _even_poly_deriv(dist, rho2)
        step = h / np.where(np.abs(hp) > 1e-300, hp, 1.0)
        rho = np.clip(rho - step, 0.0, hi)
        done |= np.abs(step) <= NEWTON_TOL
        if done.all():
            break
    return rho, done


def _kb_solve_theta(
    dist: tuple[float, ...], r: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Solve theta + sum k_n theta^(2n+1) = r for the polar angle."""
    th_fold = _stationary_radius(dist)
    hi = min(th_fold, math.pi - 1e-9)
    theta = np.minimum(r, 0.999 * hi)
    done = np.zeros(theta.shape, dtype=bool)
    for _ in range(NEWTON_MAX_ITER):
        h = _odd_poly_theta(dist, theta) - r
        hp = _odd_poly_theta_deriv(dist, theta)
        step = h / np.where(np.abs(hp) > 1e-300, hp, 1.0)
        theta = np.clip(theta - step, 0.0, hi)
        done |= np.abs(step) <= NEWTON_TOL
        if done.all():
            break
    return theta, done


def _unproject_arrays(
    spec: CameraSpec, pixels: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    fam = spec.model.family
    mx = (pixels[..., 0] - spec.cx) / spec.fx
    my = (pixels[..., 1] - spec.cy) / spec.fy
    r = np.hypot(mx, my)
    valid = np.isfinite(r)

    if fam is Family.PINHOLE:
        g = np.stack([mx, my, np.ones_like(mx)], axis=-1)
    elif fam is Family.BROWN_CONRADY:
        rho, done = _bc_undistort_radius(spec.dist, r)
        valid &= done
        scale = np.where(r > 1e-12, rho / np.where(r > 1e-12, r, 1.0), 1.0)
        g = np.stack([scale * mx, scale * my, np.ones_like(mx)], axis=-1)
    elif fam is Family.KANNALA_BRANDT:
        theta, done = _kb_solve_theta(spec.dist, r)
        valid &= done
        sc = np.where(r > 1e-12, np.sin(theta) / np.where(r > 1e-12, r, 1.0), 1.0)
        g = np.stack([sc * mx, sc * my, np.cos(theta)], axis=-1)
    elif fam is Family.UCM:
        xi = spec.dist[0]
        r2 = r * r
        arg = 1.0 + (1.0 - xi * xi) * r2
        valid &= arg >= 0.0
        s = (xi + np.sqrt(np.maximum(arg, 0.0))) / (1.0 + r2)
        g = np.stack([s * mx, s * my, s - xi], axis=-1)
    elif fam is Family.EUCM:
        alpha, beta = spec.dist
        r2 = r * r
        arg = 1.0 - (2.0 * alpha - 1.0) * beta * r2
        valid &= arg >= 0.0
        den = alpha * np.sqrt(np.maximum(arg, 0.0)) + (1.0 - alpha)
        valid &= den > 1e-12
        mz = (1.0 - beta * alpha * alpha * r2) / np.where(den > 1e-12, den, 1.0)
        g = np.stack([mx, my, mz], axis=-1)
    elif fam is Family.DIVISION:
        valid &= r <= _division_fold_radius(spec.dist)
        g = np.stack([mx, my, _division_psi(spec, r)], axis=-1)
    else:
        raise UnsupportedFamily(str(fam))

    norm = np.linalg.norm(g, axis=-1, keepdims=True)
    valid &= norm[..., 0] > 1e-12
    rays = g / np.where(norm > 1e-12, norm, 1.0)
    return rays, valid & np.all(np.isfinite(rays), axis=-1)


def unproject_masked(
    spec: CameraSpec, pixels: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Unproject pixels, returning (unit rays, valid_mask) without raising."""
    pixels = np.asarray(pixels, dtype=np.float64)
    return _unproject_arrays(spec, pixels)


def unproject(spec: CameraSpec, pixels: np.ndarray) -> np.ndarray:
    """Unproject pixel coordinates to unit rays.

    Raises:
        NonInvertiblePixel: on Newton divergence or pixels outside the
            injective image region.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    rays, ok = _unproject_arrays(spec, pixels)
    if not ok.all():
        n_bad = int(np.size(ok) - np.count_nonzero(ok))
        raise NonInvertiblePixel(f"{n_bad} of {np.size(ok)} pixels not invertible")
    return rays


# ---------------------------------------------------------------------------
# validity limits
# ---------------------------------------------------------------------------


def min_focal(
    model: ModelId, dist: tuple[float, ...] | list[float], width: int, height: int
) -> float:
    """Smallest focal length keeping the projection injective over the image.

    Brown-Conrady folds at the first stationary point of rho * psi(rho); the
    extended unified model folds at the normalized radius 1/sqrt(beta(2a-1))
    when alpha > 0.5.  Families without a fold constraint return 0.
    """
    dist = tuple(float(k) for k in dist)
    r_im = 0.5 * math.hypot(width, height)
    if model.family is Family.BROWN_CONRADY:
        rho_max = _stationary_radius(dist)
        if not math.isfinite(rho_max):
            return 0.0
        peak = rho_max * float(_even_poly(dist, np.array(rho_max**2)))
        return r_im / peak
    if model.family is Family.EUCM:
        alpha, beta = dist
        if alpha <= 0.5:
            return 0.0
        return r_im * math.sqrt(beta * (2.0 * alpha - 1.0))
    return 0.0


@dataclass(frozen=True)
class ValidityReport:
    """Outcome of ``validate_spec``: empty ``violations`` means OK."""

    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_spec(spec: CameraSpec) -> ValidityReport:
    """Check parameter bounds and the injectivity clamp for a spec."""
    bad: list[str] = []
    if not (spec.fx > 0.0 and math.isfinite(spec.fx)):
        bad.append(f"fx must be positive, got {spec.fx}")
    if not (spec.fy > 0.0 and math.isfinite(spec.fy)):
        bad.append(f"fy must be positive, got {spec.fy}")
    if spec.width <= 0 or spec.height <= 0:
        bad.append("image size must be positive")
    fam = spec.model.family
    if fam is Family.UCM and spec.dist[0] < 0.0:
        bad.append(f"xi must be >= 0, got {spec.dist[0]}")
    if fam is Family.EUCM:
        alpha, beta = spec.dist
        if not 0.0 <= alpha <= 1.0:
            bad.append(f"alpha must be in [0, 1], got {alpha}")
        if beta <= 0.0:
            bad.append(f"beta must be > 0, got {beta}")
    if not bad and fam in (Family.BROWN_CONRADY, Family.EUCM):
        # corner-vs-fold check in normalized units; for a centered square spec
        # with unit aspect this is exactly fx >= min_focal(...)
        if fam is Family.BROWN_CONRADY:
            rho_max = _stationary_radius(spec.dist)
            fold = (
                rho_max * float(_even_poly(spec.dist, np.array(rho_max**2)))
                if math.isfinite(rho_max)
                else math.inf
            )
        else:
            alpha, beta = spec.dist
            fold = (
                1.0 / math.sqrt(beta * (2.0 * alpha - 1.0))
                if alpha > 0.5
                else math.inf
            )
        corner = _corner_norm_radius(spec)
        if corner > fold:
            bad.append(
                f"focal below the injectivity clamp: corner radius {corner:.6g} "
                f"exceeds the fold radius {fold:.6g} in normalized units"
            )
    return ValidityReport(tuple(bad))
