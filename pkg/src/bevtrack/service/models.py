"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field


class DepthHintIn(BaseModel):
    depth: float
    confident: bool = False


class DetectionIn(BaseModel):
    frame: int
    sensor: str
    kind: Literal["camera", "radar", "bev"] = "camera"
    # camera fields
    bbox: Optional[list[float]] = None
    confidence: Optional[float] = None
    cls: Optional[str] = Field(default=None, alias="class")
    feature: Optional[list[float]] = None
    depth_hint: Optional[DepthHintIn] = None
    # radar fields
    r: Optional[float] = None
    theta: Optional[float] = None
    doppler: Optional[float] = None
    rcs: Optional[float] = None
    # bev fields
    z: Optional[list[float]] = None
    cov: Optional[list[float]] = None
    cov_pose: Optional[list[float]] = None

    model_config = {"populate_by_name": True}

    def to_record(self) -> dict:
        row: dict[str, Any] = {"frame": self.frame, "sensor": self.sensor,
                               "kind": self.kind}
        for key in ("bbox", "confidence", "feature", "r", "theta", "doppler",
                    "rcs", "z", "cov", "cov_pose"):
            value = getattr(self, key)
            if value is not None:
                row[key] = value
        if self.cls is not None:
            row["class"] = self.cls
        if self.depth_hint is not None:
            row["depth_hint"] = self.depth_hint.model_dump()
        return row


class TrackOut(BaseModel):
    frame: int
    id: int
    x: float
    y: float
    vx: float
    vy: float
    cov: list[float]
    mode: int
    state: str


class ManifestOut(BaseModel):
    config_hash: str
    sensors: list[str]
    n_frames: int
    n_records: int
    stage_seconds: dict[str, float]
    seed: Optional[int] = None


class TrackRequest(BaseModel):
    detections: list[DetectionIn]
    calibration: list[dict]
    config: Optional[dict] = None
    preset: Optional[str] = None


class TrackResponse(BaseModel):
    tracks: list[TrackOut]
    manifest: ManifestOut


class SessionCreate(BaseModel):
    calibration: list[dict]
    config: Optional[dict] = None
    preset: Optional[str] = None


class SessionInfo(BaseModel):
    session_id: str
    frames_processed: int
    active_tracks: int


class FrameRequest(BaseModel):
    frame: int
    detections: list[DetectionIn] = Field(default_factory=list)


class FrameResponse(BaseModel):
    frame: int
    tracks: list[TrackOut]


class GroundTruthIn(BaseModel):
    frame: int
    gt_id: int | str
    x: float
    y: float


class EvaluateRequest(BaseModel):
    tracks: list[TrackOut]
    gt: list[GroundTruthIn]
    config: Optional[dict] = None


class NeesOut(BaseModel):
    verdict: str
    mean_nees: float
    ci: list[float]
    n: int
    coverage_1sigma: float
    coverage_2sigma: float
    nominal_1sigma: float
    nominal_2sigma: float


class EvaluateResponse(BaseModel):
    MOTA: float
    MOTP: float
    IDF1: float
    mean_GOSPA: float
    FP: int
    FN: int
    IDSW: int
    matches: int
    gt_total: int
    NEES: Optional[NeesOut] = None


class SimulateRequest(BaseModel):
    spec: dict
    seed: int = 0


class SimulateResponse(BaseModel):
    gt: list[dict]
    detections: list[dict]
    calibration: list[dict]
