"""Pose tracking of a tumbling rigid target from point-cloud scans.

ICP registration against a surface model, coupled to a multiplicative
extended Kalman filter that also estimates the target's inertia ratios,
centre-of-mass offset and principal-axis orientation.
"""

__version__ = "0.1.0"

from .dynamics import OrbitParams, StateVector, TargetTruth, integrate_truth, observed_pose  # noqa: E402
from .ekf import FilterState, Measurement, NoiseConfig, ekf_correct, ekf_propagate, initial_state  # noqa: E402
from .icp import IcpOptions, IcpResult, Pose, SurfaceModel, horn_align, icp_register  # noqa: E402
from .kernels import BACKEND  # noqa: E402
from .pipeline import ScenarioConfig, TrackRecord, compute_metrics, load_preset, run_scenario  # noqa: E402
from .sensor import FaultSchedule, ScanFrame, apply_faults, sample_scan  # noqa: E402

__all__ = [
    "BACKEND", "OrbitParams", "StateVector", "TargetTruth", "integrate_truth", "observed_pose",
    "FilterState", "Measurement", "NoiseConfig", "ekf_correct", "ekf_propagate", "initial_state",
    "IcpOptions", "IcpResult", "Pose", "SurfaceModel", "horn_align", "icp_register",
    "ScenarioConfig", "TrackRecord", "compute_metrics", "load_preset", "run_scenario",
    "FaultSchedule", "ScanFrame", "apply_faults", "sample_scan",
]
