"""Camera intrinsics from per-pixel ray fields.

Closed-form recovery of six camera-model families from dense tangent-plane
FoV fields, Gauss-Newton geometric refinement, synthetic ground-truth
generation, and model-agnostic evaluation metrics.
"""

from .errors import (
    AntipodalRay,
    BorderUnprojectionFailed,
    BoundInfeasible,
    CalibError,
    DegenerateGeometry,
    DimensionMismatch,
    EmptyInput,
    FovOutOfRange,
    InvalidFocal,
    NewtonDivergence,
    NoConsensus,
    NonInvertiblePixel,
    RayOutsideDomain,
    SingularNormalMatrix,
    ThetaOutOfDomain,
    UnsupportedFamily,
)
from .fit import (
    CalibrationResult,
    Correspondences,
    calibrate,
    calibrate_ransac,
    convert_model,
    fit_eucm,
    fit_linear,
    fit_ppoint_aspect,
    refine,
)
from .fov import (
    FovField,
    RayGrid,
    exp_map,
    field_from_spec,
    field_l1,
    log_map,
    rays_from_field,
)
from .metrics import (
    EvalReport,
    angular_error,
    auc,
    edited_errors,
    evaluate,
    fov_agnostic,
    reproj_error,
)
from .models import (
    CameraSpec,
    Family,
    ModelId,
    min_focal,
    parse_model,
    project,
    project_masked,
    radial_profile,
    theta_max,
    unproject,
    unproject_masked,
    validate_spec,
)
from .synth import (
    DatasetKind,
    IntrinsicsSampler,
    LensfunEntry,
    SamplerConfig,
    add_noise,
    apply_edit,
    focal_from_fov,
    lensfun_to_eucm,
    load_lensfun_entry,
    parse_lensfun_xml,
    sample_edit,
    sample_intrinsics,
    sample_spec_for_model,
)

__version__ = "0.1.0"

__all__ = [
    "AntipodalRay",
    "BorderUnprojectionFailed",
    "BoundInfeasible",
    "CalibError",
    "CalibrationResult",
    "CameraSpec",
    "Correspondences",
    "DatasetKind",
    "DegenerateGeometry",
    "DimensionMismatch",
    "EmptyInput",
    "EvalReport",
    "Family",
    "FovField",
    "FovOutOfRange",
    "IntrinsicsSampler",
    "InvalidFocal",
    "LensfunEntry",
    "ModelId",
    "NewtonDivergence",
    "NoConsensus",
    "NonInvertiblePixel",
    "RayGrid",
    "RayOutsideDomain",
    "SamplerConfig",
    "SingularNormalMatrix",
    "ThetaOutOfDomain",
    "UnsupportedFamily",
    "add_noise",
    "angular_error",
    "apply_edit",
    "auc",
    "calibrate",
    "calibrate_ransac",
    "convert_model",
    "edited_errors",
    "evaluate",
    "exp_map",
    "field_from_spec",
    "field_l1",
    "fit_eucm",
    "fit_linear",
    "fit_ppoint_aspect",
    "focal_from_fov",
    "fov_agnostic",
    "lensfun_to_eucm",
    "load_lensfun_entry",
    "log_map",
    "parse_lensfun_xml",
    "min_focal",
    "parse_model",
    "project",
    "project_masked",
    "radial_profile",
    "rays_from_field",
    "refine",
    "reproj_error",
    "sample_edit",
    "sample_intrinsics",
    "sample_spec_for_model",
    "theta_max",
    "unproject",
    "unproject_masked",
    "validate_spec",
]
