"""Rigid-body inertia and centre-of-gravity identification from throw recordings."""

__version__ = "0.1.0"

from .dynamics import (
    GRAVITY,
    NoiseModel,
    SimConfig,
    SimOutput,
    ThrowRecording,
    WheelPulse,
    corrupt,
    simulate,
)
from .errors import (
    DataError,
    FormatError,
    NumericalError,
    RankDeficiencyError,
    TumblefitError,
    WindowError,
)
from .estimation import (
    DeviceCalibration,
    EstimationResult,
    calibrate,
    condition,
    estimate_throw,
    fit_inertia,
)
from .inertia import (
    InertiaTensor,
    MassProperties,
    PointMassSet,
    PrincipalDecomposition,
    combine,
    cuboid_inertia,
    parallel_axis,
    principal_decompose,
)
from .metrics import (
    AccuracyReport,
    alignment_error,
    compare,
    condition_number,
    magnitude_error,
    principal_similarity,
)
from .montecarlo import (
    BodySampler,
    SweepResult,
    SweepSpec,
    run_sweep,
    run_trial,
    sample_body,
    sample_initial_spin,
)
from .signals import FilterSpec, Window, filtfilt

__all__ = [
    "__version__",
    "GRAVITY",
    "NoiseModel",
    "SimConfig",
    "SimOutput",
    "ThrowRecording",
    "WheelPulse",
    "corrupt",
    "simulate",
    "DataError",
    "FormatError",
    "NumericalError",
    "RankDeficiencyError",
    "TumblefitError",
    "WindowError",
    "DeviceCalibration",
    "EstimationResult",
    "calibrate",
    "condition",
    "estimate_throw",
    "fit_inertia",
    "InertiaTensor",
    "MassProperties",
    "PointMassSet",
    "PrincipalDecomposition",
    "combine",
    "cuboid_inertia",
    "parallel_axis",
    "principal_decompose",
    "AccuracyReport",
    "alignment_error",
    "compare",
    "condition_number",
    "magnitude_error",
    "principal_similarity",
    "BodySampler",
    "SweepResult",
    "SweepSpec",
    "run_sweep",
    "run_trial",
    "sample_body",
    "sample_initial_spin",
    "FilterSpec",
    "Window",
    "filtfilt",
]
