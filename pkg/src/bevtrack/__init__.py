"""Sensor-agnostic multi-view BEV tracking.

Raw sensor observations (camera pixel detections, radar polar points, or
pre-calibrated BEV estimates) become position-covariance pairs, get
chi-square cluster-fused across sensors, and feed an identity-informed
GM-PHD filter with persistent track identities. A deterministic
multi-sensor simulator and a metrics suite (CLEAR MOT, IDF1, GOSPA,
NEES calibration) make the whole chain verifiable end to end.
"""

from .config import ConfigError, EvalConfig, TrackerConfig, load_config, preset
from .fusion import FusedCluster, fuse_cluster, pool_features
from .geometry import (BevMeasurement, CameraModel, DepthEstimate, DepthHint,
                       PixelDetection, RadarPoint, RadarPose)
from .metrics import EvalReport, NeesReport
from .phd import GaussianComponent, GmPhdTracker, TrackRecord, TrackState
from .sim import Scenario, generate_scenario

__all__ = [
    "BevMeasurement", "CameraModel", "ConfigError", "DepthEstimate",
    "DepthHint", "EvalConfig", "EvalReport", "FusedCluster",
    "GaussianComponent", "GmPhdTracker", "NeesReport", "PixelDetection",
    "RadarPoint", "RadarPose", "Scenario", "TrackRecord", "TrackState",
    "TrackerConfig", "fuse_cluster", "generate_scenario", "load_config",
    "pool_features", "preset",
]

__version__ = "0.1.0"
