"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

import raycalib as rc

ALL_MODEL_STRINGS = [
    "pinhole",
    "radial:1",
    "radial:2",
    "radial:3",
    "radial:4",
    "kb:1",
    "kb:2",
    "kb:3",
    "kb:4",
    "ucm",
    "eucm",
    "division:1",
    "division:2",
    "division:3",
]

# distortion coefficients are drawn from zero-centered laws, so a pure
# relative comparison degenerates when a true coefficient lands near zero;
# deviations on such coefficients are measured against this absolute floor
DIST_FLOOR = 1e-3


def param_errors(got: rc.CameraSpec, want: rc.CameraSpec) -> dict[str, float]:
    errs = {
        "fx": abs(got.fx - want.fx) / want.fx,
        "fy": abs(got.fy - want.fy) / want.fy,
        "cx": abs(got.cx - want.cx) / max(abs(want.cx), 1.0),
        "cy": abs(got.cy - want.cy) / max(abs(want.cy), 1.0),
    }
    for n, (g, w) in enumerate(zip(got.dist, want.dist), start=1):
        errs[f"k{n}"] = abs(g - w) / max(abs(w), DIST_FLOOR)
    return errs


def max_param_error(got: rc.CameraSpec, want: rc.CameraSpec) -> float:
    return max(param_errors(got, want).values())


def centered_spec(model_str: str, fov_deg: float, size: int, dist=()) -> rc.CameraSpec:
    """Centered square spec with the focal solved from the field of view."""
    model = rc.parse_model(model_str)
    f = rc.focal_from_fov(model, tuple(dist), fov_deg, size)
    f_min = rc.min_focal(model, tuple(dist), size, size)
    f = max(f, f_min * (1 + 1e-6))
    return rc.CameraSpec(
        model=model,
        fx=f,
        fy=f,
        cx=size / 2.0,
        cy=size / 2.0,
        dist=tuple(dist),
        width=size,
        height=size,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_unit_rays(rng: np.random.Generator, n: int, theta_max: float) -> np.ndarray:
    """Uniform-azimuth rays with polar angle uniform in (0, theta_max)."""
    theta = rng.uniform(0.0, theta_max, n)
    az = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.stack(
        [np.sin(theta) * np.cos(az), np.sin(theta) * np.sin(az), np.cos(theta)],
        axis=-1,
    )
