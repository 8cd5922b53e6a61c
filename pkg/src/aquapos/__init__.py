"""Collaborative surface-to-underwater positioning: a surface vehicle
tracks its own pose and localizes an underwater marker below it, either
through the full PnP transform chain ("cpnp") or by intersecting the
camera ray with the calibrated depth plane ("cd")."""

from .attitude import ImuSample, TiltConfig, TiltState, TiltTracker
from .camera import DEFAULT_INTRINSICS, Intrinsics, TagGeometry, TagObservation
from .config import RunConfig, load_run_config
from .depth_calibration import CalibrationParams, PsoConfig, calibrate
from .errors import AquaposError
from .estimators import (
    EstimationPipeline,
    PositionEstimate,
    RigExtrinsics,
    SurfacePoseState,
    default_rig,
    estimate_cd,
    estimate_cpnp,
)
from .evaluation import align, build_error_report, med
from .geometry import PluckerLine, RigidTransform
from .simulator import NoiseModel, SampleRates, Simulator, TrajectorySpec

__version__ = "0.1.0"

__all__ = [
    "AquaposError",
    "CalibrationParams",
    "DEFAULT_INTRINSICS",
    "EstimationPipeline",
    "ImuSample",
    "Intrinsics",
    "NoiseModel",
    "PluckerLine",
    "PositionEstimate",
    "PsoConfig",
    "RigExtrinsics",
    "RigidTransform",
    "RunConfig",
    "SampleRates",
    "Simulator",
    "SurfacePoseState",
    "TagGeometry",
    "TagObservation",
    "TiltConfig",
    "TiltState",
    "TiltTracker",
    "TrajectorySpec",
    "align",
    "build_error_report",
    "calibrate",
    "default_rig",
    "estimate_cd",
    "estimate_cpnp",
    "load_run_config",
    "med",
]
