"""Closed-form intrinsics recovery from 2D-3D correspondences plus refinement.

The pipeline factors the recovery into stages that stay linear in the
unknowns:

1. principal point and pixel aspect ratio from the model-independent
   constraint  u*Y*a - Y*a*cx + X*cy = v*X,  solved for (a, a*cx, cy);
2. the remaining intrinsics from family-specific rows that are linear once
   (a, c) are known (with the reparameterizations g = 1/f for radial/kb and
   k'_n = k_n * f^(2n-1) for the division model);
3. for the extended unified model, whose rows are not linear in f, the focal
   is first estimated with a kb:3 proxy fit and the constraint
   r^2 R^2 gamma + 2 r Z (r Z - R) alpha = (R - r Z)^2  is then solved for
   (gamma, alpha) with gamma = alpha^2 beta, enforcing the parameter bounds
   with a simplified active set (solve unconstrained, clamp violated bounds,
   re-solve the free unknowns);
4. five Gauss-Newton iterations on the mean squared tangent-plane residual
   between the target rays and the unprojections of the current intrinsics.
   Each step is halved up to four times if the cost would increase, so the
   recorded per-iteration costs never increase.

All linear stages use orthogonal factorizations (SVD-backed lstsq), never
explicit normal equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    BoundInfeasible,
    DegenerateGeometry,
    InvalidFocal,
    NoConsensus,
    UnsupportedFamily,
)
from .fov import FovField, exp_map
from .models import (
    CameraSpec,
    Family,
    ModelId,
    _bc_undistort_radius,
    _even_poly,
    _even_poly_deriv,
    _kb_solve_theta,
    _odd_poly_theta_deriv,
    unproject_masked,
)

EUCM_PROXY_ORDER = 3  # kb order used to estimate the extended model's focal

_RCOND = 1e-12
_GN_ITERATIONS = 5
_GN_MAX_HALVINGS = 4
_EPS_XY = 1e-9  # rows with |X| and |Y| both below this are dropped
_EPS_Z = 1e-6  # pinhole / radial rows require Z above this


# ---------------------------------------------------------------------------
# correspondences
# ---------------------------------------------------------------------------



@dataclass(frozen=True)
class Correspondences:
    """Paired pixel coordinates (n, 2) and unit rays (n, 3)."""

    pixels: np.ndarray
    rays: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels, dtype=np.float64).reshape(-1, 2)
        rays = np.asarray(self.rays, dtype=np.float64).reshape(-1, 3)
        if len(px) != len(rays):
            raise ValueError("pixels and rays must have equal length")
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "rays", rays)

    def __len__(self) -> int:
        return len(self.pixels)

    def subset(self, idx: np.ndarray) -> "Correspondences":
        return Correspondences(self.pixels[idx], self.rays[idx])

    @classmethod
    def from_field(cls, fov_field: FovField, stride: int = 1) -> "Correspondences":
        """Pixel centers and exp-mapped rays of a field, optionally strided."""
        theta = fov_field.theta[::stride, ::stride]
        px = fov_field.pixel_grid()[::stride, ::stride]
        return cls(px.reshape(-1, 2), exp_map(theta.reshape(-1, 2)))

    @classmethod
    def from_spec(cls, spec: CameraSpec, stride: int = 1) -> "Correspondences":
        """Unprojection grid of a camera, dropping non-invertible cells."""
        u = (np.arange(spec.width // stride) + 0.5) * stride
        v = (np.arange(spec.height // stride) + 0.5) * stride
        uu, vv = np.meshgrid(u, v)
        px = np.stack([uu.ravel(), vv.ravel()], axis=-1)
        rays, ok = unproject_masked(spec, px)
        return cls(px[ok], rays[ok])



@dataclass(frozen=True)
class CalibrationResult:
    """A fitted spec plus per-stage diagnostics.

    ``gn_costs[0]`` is the mean squared tangent residual (radians^2) of the
    algebraic solution; each later entry is the cost after one Gauss-Newton
    iteration, so the sequence is non-increasing.
    """

    spec: CameraSpec
    algebraic_spec: CameraSpec
    gn_costs: tuple[float, ...]
    ppoint_residual: float = float("nan")
    active_bounds: tuple[str, ...] = ()
    warning: str | None = None
    inlier_ratio: float | None = None
    dropped: int = 0

    def to_dict(self) -> dict:
        out = self.spec.to_dict()
        out["gn_costs"] = list(self.gn_costs)
        out["active_bounds"] = list(self.active_bounds)
        out["ppoint_residual"] = self.ppoint_residual
        out["algebraic"] = self.algebraic_spec.to_dict()
        if self.warning is not None:
            out["warning"] = self.warning
        if self.inlier_ratio is not None:
            out["inlier_ratio"] = self.inlier_ratio
        return out



def _lstsq(A: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    if A.shape[0] < A.shape[1]:
        raise DegenerateGeometry(
            f"{what}: {A.shape[0]} rows cannot determine {A.shape[1]} unknowns"
        )
    # equilibrate columns so power-basis systems are not rank-truncated
    scale = np.linalg.norm(A, axis=0)
    if np.any(scale <= 0.0) or not np.all(np.isfinite(scale)):
        raise DegenerateGeometry(f"{what}: zero or non-finite column")
    sol, _, rank, _ = np.linalg.lstsq(A / scale, b, rcond=_RCOND)
    if rank < A.shape[1]:
        raise DegenerateGeometry(f"{what}: rank {rank} < {A.shape[1]} unknowns")
    return sol / scale


# ---------------------------------------------------------------------------
# stage 1: principal point and aspect ratio
# ---------------------------------------------------------------------------



def _fit_ppoint_full(corrs: Correspondences) -> tuple[float, float, float, float]:
    X, Y = corrs.rays[:, 0], corrs.rays[:, 1]
    u, v = corrs.pixels[:, 0], corrs.pixels[:, 1]
    keep = (np.abs(X) >= _EPS_XY) | (np.abs(Y) >= _EPS_XY)
    if np.count_nonzero(keep) < 3:
        raise DegenerateGeometry("need at least 3 off-axis correspondences")
    X, Y, u, v = X[keep], Y[keep], u[keep], v[keep]
    A = np.stack([u * Y, -Y, X], axis=-1)
    b = v * X
    sol = _lstsq(A, b, "principal point / aspect solve")
    a, a_cx, cy = sol
    if a <= 0:
        raise DegenerateGeometry(f"recovered nonpositive aspect ratio {a:.6g}")
    residual = float(np.sqrt(np.mean((A @ sol - b) ** 2)))
    return float(a), float(a_cx / a), float(cy), residual



def fit_ppoint_aspect(corrs: Correspondences) -> tuple[float, float, float]:
    """Recover (aspect, cx, cy) from the model-independent linear constraint."""
    a, cx, cy, _ = _fit_ppoint_full(corrs)
    return a, cx, cy


# ---------------------------------------------------------------------------
# stage 2: family-specific linear rows
# ---------------------------------------------------------------------------



def _row_quantities(corrs: Correspondences, a: float, c: tuple[float, float]):
    X, Y, Z = corrs.rays[:, 0], corrs.rays[:, 1], corrs.rays[:, 2]
    du = corrs.pixels[:, 0] - c[0]
    dv = corrs.pixels[:, 1] - c[1]
    R = np.hypot(X, Y)
    Ra = np.sqrt(X * X + a * a * Y * Y)
    rc = np.hypot(du, dv)
    theta = np.arctan2(R, Z)
    d = np.sqrt(X * X + Y * Y + Z * Z)
    rca2 = du * du + (dv / a) ** 2
    return X, Y, Z, R, Ra, rc, theta, d, rca2



def _make_spec(
    model: ModelId,
    f: float,
    a: float,
    c: tuple[float, float],
    dist: tuple[float, ...],
    size: tuple[int, int],
) -> CameraSpec:
    if f <= 0 or not math.isfinite(f):
        raise InvalidFocal(f"solved focal length {f:.6g} is not positive")
    return CameraSpec(
        model=model,
        fx=f,
        fy=a * f,
        cx=c[0],
        cy=c[1],
        dist=dist,
        width=size[0],
        height=size[1],
    )



def _fit_linear_full(
    model: ModelId,
    corrs: Correspondences,
    a: float,
    c: tuple[float, float],
    size: tuple[int, int],
) -> tuple[CameraSpec, tuple[str, ...]]:
    fam = model.family
    if fam is Family.EUCM:
        return _fit_eucm_full(corrs, a, c, size)
    X, Y, Z, R, Ra, rc, theta, d, rca2 = _row_quantities(corrs, a, c)

    if fam in (Family.PINHOLE, Family.BROWN_CONRADY):
        keep = Z > _EPS_Z
        X, Y, Z, R, Ra, rc, theta, d, rca2 = (
            q[keep] for q in (X, Y, Z, R, Ra, rc, theta, d, rca2)
        )

    if fam is Family.PINHOLE:
        f = float(_lstsq(Ra[:, None], Z * rc, "pinhole focal solve")[0])
        return _make_spec(model, f, a, c, (), size), ()

    if fam is Family.BROWN_CONRADY:
        rho2 = (R / Z) ** 2
        cols = [rc * Z] + [-Ra * rho2 ** n for n in range(1, model.num_dist + 1)]
        sol = _lstsq(np.stack(cols, axis=-1), Ra, "radial linear solve")
        g, ks = sol[0], sol[1:]
        if g <= 0:
            raise InvalidFocal(f"solved inverse focal {g:.6g} is not positive")
        return _make_spec(model, 1.0 / g, a, c, tuple(ks), size), ()

    if fam is Family.KANNALA_BRANDT:
        cols = [R * rc] + [
            -Ra * theta ** (2 * n + 1) for n in range(1, model.num_dist + 1)
        ]
        sol = _lstsq(np.stack(cols, axis=-1), Ra * theta, "kb linear solve")
        g, ks = sol[0], sol[1:]
        if g <= 0:
            raise InvalidFocal(f"solved inverse focal {g:.6g} is not positive")
        return _make_spec(model, 1.0 / g, a, c, tuple(ks), size), ()

    if fam is Family.UCM:
        A = np.stack([Ra, -rc * d], axis=-1)
        f, xi = _lstsq(A, rc * Z, "ucm linear solve")
        bounds: tuple[str, ...] = ()
        if xi < 0.0:
            xi = 0.0
            f = float(_lstsq(Ra[:, None], rc * Z, "ucm re-solve with xi=0")[0])
            bounds = ("xi>=0",)
        return _make_spec(model, float(f), a, c, (float(xi),), size), bounds

    if fam is Family.DIVISION:
        cols = [Ra] + [Ra * rca2 ** n for n in range(1, model.num_dist + 1)]
        sol = _lstsq(np.stack(cols, axis=-1), Z * rc, "division linear solve")
        f, kprime = float(sol[0]), sol[1:]
        if f <= 0:
            raise InvalidFocal(f"solved focal {f:.6g} is not positive")
        ks = tuple(kp * f ** (2 * n - 1) for n, kp in enumerate(kprime, start=1))
        return _make_spec(model, f, a, c, ks, size), ()

    raise UnsupportedFamily(str(fam))



def fit_linear(
    model: ModelId,
    corrs: Correspondences,
    a: float,
    c: tuple[float, float],
    size: tuple[int, int],
) -> CameraSpec:
    """Solve the family's linear rows for the remaining intrinsics.

    ``size`` is the (width, height) recorded on the returned spec.
    """
    spec, _ = _fit_linear_full(model, corrs, a, c, size)
    return spec



def _fit_eucm_full(
    corrs: Correspondences,
    a: float,
    c: tuple[float, float],
    size: tuple[int, int],
    proxy_order: int = EUCM_PROXY_ORDER,
) -> tuple[CameraSpec, tuple[str, ...]]:
    proxy, _ = _fit_linear_full(
        ModelId(Family.KANNALA_BRANDT, proxy_order), corrs, a, c, size
    )
    f = proxy.fx

    X, Y, Z = corrs.rays[:, 0], corrs.rays[:, 1], corrs.rays[:, 2]
    R = np.hypot(X, Y)
    mx = (corrs.pixels[:, 0] - c[0]) / f
    my = (corrs.pixels[:, 1] - c[1]) / (a * f)
    r = np.hypot(mx, my)

    col_g = r * r * R * R
    col_a = 2.0 * r * Z * (r * Z - R)
    rhs = (R - r * Z) ** 2

    gamma, alpha = _lstsq(np.stack([col_g, col_a], axis=-1), rhs, "eucm (gamma, alpha) solve")
    bounds: list[str] = []

    def resolve(col: np.ndarray, b: np.ndarray, what: str) -> float:
        denom = float(col @ col)
        if denom <= 0.0:
            raise BoundInfeasible(f"{what}: no free unknown left to re-solve")
        return float(col @ b) / denom

    if alpha < 0.0:
        alpha = 0.0
        bounds.append("alpha>=0")
        gamma = resolve(col_g, rhs, "eucm re-solve gamma at alpha=0")
    elif alpha > 1.0:
        alpha = 1.0
        bounds.append("alpha<=1")
        gamma = resolve(col_g, rhs - col_a, "eucm re-solve gamma at alpha=1")

    if gamma <= 0.0 and alpha > 0.0:
        gamma = 0.0
        bounds.append("beta>0")
        alpha = resolve(col_a, rhs, "eucm re-solve alpha at gamma=0")
        if alpha < 0.0:
            alpha = 0.0
            bounds.append("alpha>=0")
        elif alpha > 1.0:
            alpha = 1.0
            bounds.append("alpha<=1")

    if alpha < 1e-9:
        # alpha = 0 reduces the model to a pinhole: beta is unidentifiable
        alpha, beta = 0.0, 1.0
        if "alpha>=0" not in bounds:
            bounds.append("alpha>=0")
    elif gamma <= 0.0:
        beta = 1e-6
    else:
        beta = float(gamma) / float(alpha) ** 2
    return (
        _make_spec(ModelId(Family.EUCM, 2), f, a, c, (float(alpha), float(beta)), size),
        tuple(bounds),
    )



def fit_eucm(
    corrs: Correspondences,
    a: float,
    c: tuple[float, float],
    size: tuple[int, int],
    proxy_order: int = EUCM_PROXY_ORDER,
) -> CameraSpec:
    """Fit the extended unified model: proxy focal, then (gamma, alpha) rows."""
    spec, _ = _fit_eucm_full(corrs, a, c, size, proxy_order)
    return spec


# ---------------------------------------------------------------------------
# stage 3: Gauss-Newton refinement on tangent-plane residuals
# ---------------------------------------------------------------------------



def _params_of(spec: CameraSpec) -> np.ndarray:
    return np.array([spec.fx, spec.fy, spec.cx, spec.cy, *spec.dist])


def _spec_of(template: CameraSpec, kappa: np.ndarray) -> CameraSpec:
    return template.replace(
        fx=float(kappa[0]),
        fy=float(kappa[1]),
        cx=float(kappa[2]),
        cy=float(kappa[3]),
        dist=tuple(float(k) for k in kappa[4:]),
    )


def _clamp_params(model: ModelId, kappa: np.ndarray) -> np.ndarray:
    kappa = kappa.copy()
    if model.family is Family.EUCM:
        kappa[4] = min(max(kappa[4], 1e-6), 1.0 - 1e-6)
        kappa[5] = max(kappa[5], 1e-6)
    elif model.family is Family.UCM:
        kappa[4] = max(kappa[4], 0.0)
    return kappa


def _tangent_basis(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of the tangent plane at each unit vector p (n, 3)."""
    ref = np.where(np.abs(p[:, 2:3]) < 0.9, [0.0, 0.0, 1.0], [1.0, 0.0, 0.0])
    b1 = np.cross(ref, p)
    b1 /= np.linalg.norm(b1, axis=-1, keepdims=True)
    b2 = np.cross(p, b1)
    return b1, b2


def _arc_factor(c: np.ndarray) -> np.ndarray:
    """theta / sin(theta) expressed through c = cos(theta), series near 1."""
    s2 = np.maximum(1.0 - c * c, 0.0)
    small = s2 < 1e-16
    return np.where(
        small, 1.0, np.arccos(np.clip(c, -1.0, 1.0)) / np.sqrt(np.where(small, 1.0, s2))
    )


def _arc_factor_deriv(c: np.ndarray, w: np.ndarray) -> np.ndarray:
    """d/dc of the arc factor: (c w - 1) / (1 - c^2), -> -1/3 as c -> 1."""
    s2 = 1.0 - c * c
    small = s2 < 1e-8
    return np.where(small, -1.0 / 3.0, (c * w - 1.0) / np.where(small, 1.0, s2))


def _residuals(
    spec: CameraSpec,
    pixels: np.ndarray,
    targets: np.ndarray,
    b1: np.ndarray,
    b2: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Tangent residuals (n, 2): invalid rows come back zeroed with mask False."""
    q, ok = unproject_masked(spec, pixels)
    c = np.sum(targets * q, axis=-1)
    w = _arc_factor(c)
    e = np.stack([w * np.sum(b1 * q, -1), w * np.sum(b2 * q, -1)], axis=-1)
    e = np.where(ok[:, None], e, 0.0)
    return e, ok


def _mean_cost(e: np.ndarray, ok: np.ndarray) -> float:
    n = int(np.count_nonzero(ok))
    if n == 0:
        return math.inf
    return float(np.sum(e * e) / n)

_ANALYTIC_FAMILIES = (
    Family.PINHOLE,
    Family.BROWN_CONRADY,
    Family.KANNALA_BRANDT,
    Family.UCM,
    Family.EUCM,
    Family.DIVISION,
)


def _unnormalized_ray_jacobian(
    spec: CameraSpec, pixels: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """g and dg/dkappa for the closed-form families, shapes (n,3), (n,3,P)."""
    fam = spec.model.family
    n = len(pixels)
    n_par = 4 + spec.model.num_dist
    mx = (pixels[:, 0] - spec.cx) / spec.fx
    my = (pixels[:, 1] - spec.cy) / spec.fy
    # dm/d(fx, fy, cx, cy): each (n, 4)
    dmx = np.zeros((n, n_par))
    dmy = np.zeros((n, n_par))
    dmx[:, 0] = -mx / spec.fx
    dmx[:, 2] = -1.0 / spec.fx
    dmy[:, 1] = -my / spec.fy
    dmy[:, 3] = -1.0 / spec.fy

    r2 = mx * mx + my * my
    dr2 = 2.0 * mx[:, None] * dmx + 2.0 * my[:, None] * dmy

    g = np.empty((n, 3))
    dg = np.zeros((n, 3, n_par))
    g[:, 0], g[:, 1] = mx, my
    dg[:, 0, :], dg[:, 1, :] = dmx, dmy

    if fam is Family.PINHOLE:
        g[:, 2] = 1.0
    elif fam is Family.BROWN_CONRADY:
        # rho solves rho * psi(rho) = r; differentiate the converged solution
        # implicitly: drho/dr = 1/h'(rho), drho/dk_n = -rho^(2n+1)/h'(rho)
        r = np.sqrt(r2)
        rho, _ = _bc_undistort_radius(spec.dist, r)
        rho2 = rho * rho
        hp = _even_poly(spec.dist, rho2) + 2.0 * rho2 * _even_poly_deriv(spec.dist, rho2)
        hp = np.where(np.abs(hp) > 1e-12, hp, 1e-12)
        drho_dr = 1.0 / hp
        tiny = r < 1e-9
        r_safe = np.where(tiny, 1.0, r)
        u = np.where(tiny, 1.0, rho / r_safe)
        du_dr = np.where(tiny, 0.0, (drho_dr - u) / r_safe)
        dr = (mx[:, None] * dmx + my[:, None] * dmy) / r_safe[:, None]
        dr[tiny] = 0.0
        g[:, 0], g[:, 1], g[:, 2] = u * mx, u * my, 1.0
        du = du_dr[:, None] * dr
        for n_i in range(1, len(spec.dist) + 1):
            du[:, 3 + n_i] += np.where(tiny, 0.0, -(rho ** (2 * n_i + 1)) / hp / r_safe)
        dg[:, 0, :] = u[:, None] * dmx + mx[:, None] * du
        dg[:, 1, :] = u[:, None] * dmy + my[:, None] * du
    elif fam is Family.KANNALA_BRANDT:
        # theta solves theta + sum k_n theta^(2n+1) = r; implicit derivatives
        r = np.sqrt(r2)
        theta, _ = _kb_solve_theta(spec.dist, r)
        hp = _odd_poly_theta_deriv(spec.dist, theta)
        hp = np.where(np.abs(hp) > 1e-12, hp, 1e-12)
        dth_dr = 1.0 / hp
        sin_t, cos_t = np.sin(theta), np.cos(theta)
        tiny = r < 1e-9
        r_safe = np.where(tiny, 1.0, r)
        u = np.where(tiny, 1.0, sin_t / r_safe)
        du_dr = np.where(tiny, 0.0, (cos_t * dth_dr - u) / r_safe)
        dr = (mx[:, None] * dmx + my[:, None] * dmy) / r_safe[:, None]
        dr[tiny] = 0.0
        dth = dth_dr[:, None] * dr
        du = du_dr[:, None] * dr
        for n_i in range(1, len(spec.dist) + 1):
            dth_dk = np.where(tiny, 0.0, -(theta ** (2 * n_i + 1)) / hp)
            dth[:, 3 + n_i] += dth_dk
            du[:, 3 + n_i] += np.where(tiny, 0.0, cos_t * dth_dk / r_safe)
        g[:, 0], g[:, 1], g[:, 2] = u * mx, u * my, cos_t
        dg[:, 0, :] = u[:, None] * dmx + mx[:, None] * du
        dg[:, 1, :] = u[:, None] * dmy + my[:, None] * du
        dg[:, 2, :] = -sin_t[:, None] * dth
    elif fam is Family.UCM:
        xi = spec.dist[0]
        t = np.sqrt(np.maximum(1.0 + (1.0 - xi * xi) * r2, 1e-12))
        s = (xi + t) / (1.0 + r2)
        ds_dr2 = ((1.0 - xi * xi) / (2.0 * t) * (1.0 + r2) - (xi + t)) / (1.0 + r2) ** 2
        ds_dxi = (1.0 - xi * r2 / t) / (1.0 + r2)
        ds = ds_dr2[:, None] * dr2
        ds[:, 4] += ds_dxi
        g[:, 0], g[:, 1], g[:, 2] = s * mx, s * my, s - xi
        dg[:, 0, :] = s[:, None] * dmx + mx[:, None] * ds
        dg[:, 1, :] = s[:, None] * dmy + my[:, None] * ds
        dg[:, 2, :] = ds
        dg[:, 2, 4] -= 1.0
    elif fam is Family.EUCM:
        alpha, beta = spec.dist
        arg = np.maximum(1.0 - (2.0 * alpha - 1.0) * beta * r2, 1e-12)
        t = np.sqrt(arg)
        den = alpha * t + (1.0 - alpha)
        num = 1.0 - beta * alpha * alpha * r2
        g[:, 2] = num / den
        dt_dr2 = -(2.0 * alpha - 1.0) * beta / (2.0 * t)
        dt_da = -beta * r2 / t
        dt_db = -(2.0 * alpha - 1.0) * r2 / (2.0 * t)
        dnum_dr2 = -beta * alpha * alpha
        dnum_da = -2.0 * alpha * beta * r2
        dnum_db = -alpha * alpha * r2
        dden_dr2 = alpha * dt_dr2
        dden_da = t + alpha * dt_da - 1.0
        dden_db = alpha * dt_db
        dmz_dr2 = (dnum_dr2 * den - num * dden_dr2) / den**2
        dmz_da = (dnum_da * den - num * dden_da) / den**2
        dmz_db = (dnum_db * den - num * dden_db) / den**2
        dg[:, 2, :] = dmz_dr2[:, None] * dr2
        dg[:, 2, 4] += dmz_da
        dg[:, 2, 5] += dmz_db
    elif fam is Family.DIVISION:
        ks = spec.dist
        psi = np.ones_like(r2)
        dpsi_dr2 = np.zeros_like(r2)
        for n_i in range(len(ks), 0, -1):
            psi = psi + ks[n_i - 1] * r2**n_i
            dpsi_dr2 = dpsi_dr2 + n_i * ks[n_i - 1] * r2 ** (n_i - 1)
        g[:, 2] = psi
        dg[:, 2, :] = dpsi_dr2[:, None] * dr2
        for n_i in range(1, len(ks) + 1):
            dg[:, 2, 3 + n_i] = r2**n_i
    else:
        raise UnsupportedFamily(f"no analytic jacobian for {fam}")
    return g, dg


def _residual_jacobian_analytic(
    spec: CameraSpec,
    pixels: np.ndarray,
    targets: np.ndarray,
    b1: np.ndarray,
    b2: np.ndarray,
    ok: np.ndarray,
) -> np.ndarray:
    g, dg = _unnormalized_ray_jacobian(spec, pixels)
    norm = np.linalg.norm(g, axis=-1, keepdims=True)
    q = g / norm
    # dq_j = (dg_j - q (q . dg_j)) / |g|
    qdg = np.einsum("ni,nij->nj", q, dg)
    dq = (dg - q[:, :, None] * qdg[:, None, :]) / norm[:, :, None]

    c = np.sum(targets * q, axis=-1)
    w = _arc_factor(c)
    dw = _arc_factor_deriv(c, w)
    pdq = np.einsum("ni,nij->nj", targets, dq)
    b1q = np.sum(b1 * q, -1)
    b2q = np.sum(b2 * q, -1)
    J = np.empty((len(pixels), 2, dg.shape[2]))
    J[:, 0, :] = w[:, None] * np.einsum("ni,nij->nj", b1, dq) + (dw * b1q)[:, None] * pdq
    J[:, 1, :] = w[:, None] * np.einsum("ni,nij->nj", b2, dq) + (dw * b2q)[:, None] * pdq
    return np.where(ok[:, None, None], J, 0.0)


def _residual_jacobian_numeric(
    spec: CameraSpec,
    pixels: np.ndarray,
    targets: np.ndarray,
    b1: np.ndarray,
    b2: np.ndarray,
    kappa: np.ndarray,
    free_idx: np.ndarray,
) -> np.ndarray:
    J = np.zeros((len(pixels), 2, len(kappa)))
    for j in free_idx:
        h = 1e-6 * max(1.0, abs(float(kappa[j])))
        kp, km = kappa.copy(), kappa.copy()
        kp[j] += h
        km[j] -= h
        ep, _ = _residuals(_spec_of(spec, kp), pixels, targets, b1, b2)
        em, _ = _residuals(_spec_of(spec, km), pixels, targets, b1, b2)
        J[:, :, j] = (ep - em) / (2.0 * h)
    return J


def residual_jacobian(
    spec: CameraSpec, pixels: np.ndarray, targets: np.ndarray
) -> np.ndarray:
    """Jacobian of the tangent residuals w.r.t. (fx, fy, cx, cy, *dist).

    Analytic for the closed-form-unprojection families, central differences
    for the Newton-inverted ones.  Shape (n, 2, 4 + num_dist).
    """
    b1, b2 = _tangent_basis(targets)
    kappa = _params_of(spec)
    all_idx = np.arange(len(kappa))
    if spec.model.family in _ANALYTIC_FAMILIES:
        _, ok = unproject_masked(spec, pixels)
        return _residual_jacobian_analytic(spec, pixels, targets, b1, b2, ok)
    return _residual_jacobian_numeric(spec, pixels, targets, b1, b2, kappa, all_idx)


def _refine(
    spec0: CameraSpec,
    corrs: Correspondences,
    free: np.ndarray | None = None,
    iterations: int = _GN_ITERATIONS,
) -> CalibrationResult:
    pixels, targets = corrs.pixels, corrs.rays
    b1, b2 = _tangent_basis(targets)
    kappa = _params_of(spec0)
    n_par = len(kappa)
    free_idx = np.arange(n_par) if free is None else np.asarray(free, dtype=int)

    e, ok = _residuals(spec0, pixels, targets, b1, b2)
    cost = _mean_cost(e, ok)
    costs = [cost]
    warning = None
    analytic = spec0.model.family in _ANALYTIC_FAMILIES

    for _ in range(iterations):
        if cost <= 1e-30:
            # at roundoff level further iterations only shuffle noise; record
            # the converged cost for the remaining slots
            costs.extend([cost] * (iterations - len(costs) + 1))
            break
        spec_cur = _spec_of(spec0, kappa)
        if analytic:
            J = _residual_jacobian_analytic(spec_cur, pixels, targets, b1, b2, ok)
        else:
            J = _residual_jacobian_numeric(
                spec_cur, pixels, targets, b1, b2, kappa, free_idx
            )
        J_free = J[:, :, free_idx].reshape(-1, len(free_idx))
        col_scale = np.linalg.norm(J_free, axis=0)
        try:
            if np.any(col_scale <= 0.0) or not np.all(np.isfinite(col_scale)):
                raise np.linalg.LinAlgError
            delta, _, rank, _ = np.linalg.lstsq(
                J_free / col_scale, -e.reshape(-1), rcond=_RCOND
            )
            delta = delta / col_scale
        except np.linalg.LinAlgError:
            rank, delta = 0, np.zeros(len(free_idx))
        if rank < len(free_idx) or not np.all(np.isfinite(delta)):
            warning = "singular normal matrix; refinement stopped early"
            costs.extend([cost] * (iterations - len(costs) + 1))
            break

        step = 1.0
        for _ in range(_GN_MAX_HALVINGS + 1):
            cand = kappa.copy()
            cand[free_idx] += step * delta
            cand = _clamp_params(spec0.model, cand)
            if cand[0] > 0.0 and cand[1] > 0.0:
                e_new, ok_new = _residuals(
                    _spec_of(spec0, cand), pixels, targets, b1, b2
                )
                cost_new = _mean_cost(e_new, ok_new)
                if cost_new <= cost:
                    kappa, e, ok, cost = cand, e_new, ok_new, cost_new
                    accepted = True
                    break
            step *= 0.5
        # a rejected step simply repeats the current cost
        costs.append(cost)

    return CalibrationResult(
        spec=_spec_of(spec0, kappa),
        algebraic_spec=spec0,
        gn_costs=tuple(costs),
        warning=warning,
        dropped=int(len(pixels) - np.count_nonzero(ok)),
    )


def refine(spec0: CameraSpec, corrs: Correspondences) -> CalibrationResult:
    """Polish intrinsics with five Gauss-Newton iterations on tangent residuals.

    Minimizes the mean squared tangent-plane distance between the target rays
    and the unprojections of the current intrinsics, over all parameters
    (fx, fy, cx, cy, dist).  Steps that would increase the cost are halved up
    to four times and rejected if still worse, so ``gn_costs`` never
    increases.
    """
    return _refine(spec0, corrs)


# ---------------------------------------------------------------------------
# full pipelines
# ---------------------------------------------------------------------------



def _model_unknowns(model: ModelId) -> int:
    if model.family is Family.PINHOLE:
        return 1
    if model.family in (Family.BROWN_CONRADY, Family.KANNALA_BRANDT, Family.DIVISION):
        return 1 + model.num_dist
    if model.family is Family.UCM:
        return 2
    if model.family is Family.EUCM:
        return 3
    raise UnsupportedFamily(str(model.family))


def _fit_corrs(
    model: ModelId, corrs: Correspondences, size: tuple[int, int]
) -> CalibrationResult:
    a, cx, cy, ppoint_residual = _fit_ppoint_full(corrs)
    algebraic, bounds = _fit_linear_full(model, corrs, a, (cx, cy), size)
    result = _refine(algebraic, corrs)
    return replace(result, ppoint_residual=ppoint_residual, active_bounds=bounds)


def calibrate(fov_field: FovField, model: ModelId, stride: int = 1) -> CalibrationResult:
    """Recover intrinsics of ``model`` from a FoV field.

    Rays are exp-mapped from the field, paired with their pixel centers
    (optionally strided), and passed through the closed-form stages and the
    Gauss-Newton refinement.
    """
    corrs = Correspondences.from_field(fov_field, stride)
    return _fit_corrs(model, corrs, (fov_field.width, fov_field.height))


def _angular_residuals(spec: CameraSpec, corrs: Correspondences) -> np.ndarray:
    """Angle (rad) between each target ray and the spec's unprojection; inf if invalid."""
    q, ok = unproject_masked(spec, corrs.pixels)
    dots = np.sum(q * corrs.rays, axis=-1)
    cross = np.linalg.norm(np.cross(q, corrs.rays), axis=-1)
    ang = np.arctan2(cross, dots)
    return np.where(ok, ang, np.inf)


def calibrate_ransac(
    fov_field: FovField,
    model: ModelId,
    iters: int = 100,
    thresh: float = math.radians(1.0),
    seed: int = 0,
    stride: int = 1,
) -> CalibrationResult:
    """RANSAC variant: minimal samples, consensus scoring, final refit.

    Each iteration draws a minimal sample (3 unknowns of the aspect/principal
    point stage plus the model unknowns), runs the linear stages, and scores
    inliers by angular residual below ``thresh`` (radians).  The best
    consensus set gets the full linear + refinement treatment.

    Raises:
        NoConsensus: if the best inlier ratio is below 10%.
    """
    corrs = Correspondences.from_field(fov_field, stride)
    size = (fov_field.width, fov_field.height)
    n = len(corrs)
    sample_size = 3 + _model_unknowns(model)
    if n < sample_size:
        raise DegenerateGeometry(f"{n} correspondences < minimal sample {sample_size}")
    rng = np.random.default_rng(seed)

    best_mask: np.ndarray | None = None
    best_count = 0
    best_score = math.inf
    for _ in range(iters):
        idx = rng.choice(n, size=sample_size, replace=False)
        sub = corrs.subset(idx)
        try:
            a, cx, cy, _ = _fit_ppoint_full(sub)
            cand, _ = _fit_linear_full(model, sub, a, (cx, cy), size)
        except (DegenerateGeometry, InvalidFocal, BoundInfeasible):
            continue
        ang = _angular_residuals(cand, corrs)
        mask = ang < thresh
        count = int(np.count_nonzero(mask))
        score = float(np.mean(ang[mask])) if count else math.inf
        if count > best_count or (count == best_count and score < best_score):
            best_mask, best_count, best_score = mask, count, score

    if best_mask is None or best_count < 0.1 * n:
        raise NoConsensus(
            f"best inlier count {best_count}/{n} below the 10% consensus floor"
        )
    result = _fit_corrs(model, corrs.subset(best_mask), size)
    return replace(result, inlier_ratio=best_count / n)


def convert_model(
    src: CameraSpec,
    dst_model: ModelId,
    fix_focal: bool = False,
    stride: int = 1,
) -> CameraSpec:
    """Re-express a camera in another model family.

    Grid correspondences are generated from ``src`` by unprojection and the
    destination model is fitted to them.  With ``fix_focal`` the focal
    lengths and principal point are held at the source values and only the
    distortion coefficients are solved (linearly, then refined with the
    other parameters frozen).
    """
    corrs = Correspondences.from_spec(src, stride)
    size = (src.width, src.height)
    if not fix_focal:
        return _fit_corrs(dst_model, corrs, size).spec

    a = src.aspect
    c = (src.cx, src.cy)
    f = src.fx
    X, Y, Z, R, Ra, rc, theta, d, rca2 = _row_quantities(corrs, a, c)
    fam = dst_model.family

    if fam is Family.PINHOLE:
        return _make_spec(dst_model, f, a, c, (), size)

    if fam in (Family.BROWN_CONRADY,):
        keep = Z > _EPS_Z
        rho2 = (R[keep] / Z[keep]) ** 2
        cols = [Ra[keep] * rho2 ** n_i for n_i in range(1, dst_model.num_dist + 1)]
        b = rc[keep] * Z[keep] / f - Ra[keep]
        ks = _lstsq(np.stack(cols, axis=-1), b, "fixed-focal radial solve")
        dist = tuple(ks)
    elif fam is Family.KANNALA_BRANDT:
        cols = [Ra * theta ** (2 * n_i + 1) for n_i in range(1, dst_model.num_dist + 1)]
        b = R * rc / f - Ra * theta
        ks = _lstsq(np.stack(cols, axis=-1), b, "fixed-focal kb solve")
        dist = tuple(ks)
    elif fam is Family.UCM:
        xi = float(
            _lstsq((rc * d)[:, None], Ra * f - rc * Z, "fixed-focal ucm solve")[0]
        )
        dist = (max(xi, 0.0),)
    elif fam is Family.EUCM:
        mx = (corrs.pixels[:, 0] - c[0]) / f
        my = (corrs.pixels[:, 1] - c[1]) / (a * f)
        r = np.hypot(mx, my)
        col_g = r * r * R * R
        col_a = 2.0 * r * Z * (r * Z - R)
        rhs = (R - r * Z) ** 2
        gamma, alpha = _lstsq(
            np.stack([col_g, col_a], axis=-1), rhs, "fixed-focal eucm solve"
        )
        alpha = min(max(float(alpha), 1e-6), 1.0 - 1e-6)
        beta = max(float(gamma) / alpha**2, 1e-6)
        dist = (alpha, beta)
    elif fam is Family.DIVISION:
        cols = [Ra * rca2 ** n_i for n_i in range(1, dst_model.num_dist + 1)]
        b = Z * rc - Ra * f
        kprime = _lstsq(np.stack(cols, axis=-1), b, "fixed-focal division solve")
        dist = tuple(kp * f ** (2 * n_i - 1) for n_i, kp in enumerate(kprime, start=1))
    else:
        raise UnsupportedFamily(str(fam))

    spec0 = _make_spec(dst_model, f, a, c, dist, size)
    free = np.arange(4, 4 + dst_model.num_dist)
    return _refine(spec0, corrs, free=free).spec
