"""Frozen reference scenarios shared by the test suite.

The stressed-scenario thresholds in the acceptance tests were locked
against these exact specs and seeds; change them only together.
"""

from __future__ import annotations

from bevtrack import pipeline
from bevtrack.config import TrackerConfig
from bevtrack.geometry import calibration_from_entries
from bevtrack.sim import generate_scenario


def clean_spec(n_frames: int = 100, targets: int = 10, cameras: int = 6) -> dict:
    """Well-separated constant-velocity targets, ideal sensing."""
    return {
        "arena": [-15, 15, -15, 15],
        "n_frames": n_frames,
        "dt": 0.5,
        "targets": {"count": targets, "pattern": "lanes",
                    "speed": [0.8, 1.3], "mode": "cv", "feature_dim": 16},
        "cameras": {"count": cameras, "height": 6.0, "pixel_noise": 0.0,
                    "p_detect": 1.0, "clutter": 0.0, "feature_noise": 0.05},
    }


def stressed_spec(n_frames: int = 80, targets: int = 20) -> dict:
    """Crowded scene with dropout, clutter, pixel noise, and occlusion."""
    return {
        "arena": [-15, 15, -15, 15],
        "n_frames": n_frames,
        "dt": 0.5,
        "targets": {"count": targets, "pattern": "random", "min_separation": 2.5,
                    "speed": [0.5, 1.5], "mode": "cv", "process_noise": 0.08,
                    "feature_dim": 32, "avoid_radius": 2.0},
        "cameras": {"count": 6, "height": 6.0, "pixel_noise": 1.5,
                    "p_detect": 0.9, "clutter": 2.0,
                    "confidence": [0.55, 0.95], "feature_noise": 0.12,
                    "occlusion_radius": 0.3},
    }


def dropout_spec() -> dict:
    """Smaller stressed variant used for the sensor-dropout sweep."""
    spec = stressed_spec(n_frames=40, targets=12)
    spec["targets"]["min_separation"] = 2.5
    return spec


def noise_matched_spec() -> dict:
    """Moderate noise consistent with the measurement model, light clutter."""
    return {
        "arena": [-15, 15, -15, 15],
        "n_frames": 60,
        "dt": 0.5,
        "targets": {"count": 10, "pattern": "random", "min_separation": 3.0,
                    "speed": [0.5, 1.5], "mode": "cv", "process_noise": 0.05,
                    "feature_dim": 32, "avoid_radius": 2.0},
        "cameras": {"count": 6, "height": 6.0, "pixel_noise": 1.0,
                    "p_detect": 0.95, "clutter": 0.5,
                    "confidence": [0.6, 0.95], "feature_noise": 0.1},
    }


def build(spec: dict, seed: int):
    """Scenario plus rendered detections and calibration."""
    scenario = generate_scenario(spec, seed)
    rows = pipeline.detection_rows_from_scenario(scenario, seed)
    calibration = calibration_from_entries(
        pipeline.calibration_entries_from_scenario(scenario))
    return scenario, rows, calibration


def track(rows, calibration, cfg: TrackerConfig | None = None):
    cfg = cfg or TrackerConfig()
    records = ((i + 1, r) for i, r in enumerate(rows))
    trk_rows, manifest = pipeline.run_tracking(records, calibration, cfg)
    return trk_rows, manifest
