"""FastAPI service wrapping the tracking core.

One-shot endpoints run a whole detection batch; session endpoints keep a
live filter per client so frames can stream in one at a time. Sessions
are process-local and guarded by a lock because a filter is strictly
sequential over frames.
"""

from __future__ import annotations

import threading
import uuid

from fastapi import FastAPI, HTTPException

from .. import pipeline
from ..config import ConfigError, EvalConfig, TrackerConfig, config_from_dict
from ..config import preset as make_preset
from ..geometry import CalibrationError, calibration_from_entries
from ..metrics import EvaluationError
from ..phd import GmPhdTracker, TrackState
from ..sim import generate_scenario
from .models import (DetectionIn, EvaluateRequest, EvaluateResponse,
                     FrameRequest, FrameResponse, ManifestOut, SessionCreate,
                     SessionInfo, SimulateRequest, SimulateResponse,
                     TrackRequest, TrackResponse)


class _Session:
    def __init__(self, tracker: GmPhdTracker, calibration: dict):
        self.tracker = tracker
        self.calibration = calibration
        self.cfg = tracker.cfg
        self.lock = threading.Lock()
        self.last_frame = -1


def _resolve_config(config: dict | None, preset_name: str | None) -> TrackerConfig:
    if config is not None:
        return config_from_dict(config)[0]
    if preset_name is not None:
        return make_preset(preset_name)
    return TrackerConfig()


def create_app() -> FastAPI:
    app = FastAPI(title="bevtrack", version="0.1.0")
    sessions: dict[str, _Session] = {}

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/track", response_model=TrackResponse)
    def track(req: TrackRequest) -> TrackResponse:
        try:
            cfg = _resolve_config(req.config, req.preset)
            calibration = calibration_from_entries(req.calibration)
            records = ((i + 1, d.to_record()) for i, d in enumerate(req.detections))
            rows, manifest = pipeline.run_tracking(records, calibration, cfg,
                                                   where_prefix="<request>")
        except (ConfigError, CalibrationError, pipeline.InputFormatError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return TrackResponse(tracks=rows, manifest=ManifestOut(**{
            k: v for k, v in manifest.to_dict().items()
            if k in ManifestOut.model_fields}))

    @app.post("/sessions", response_model=SessionInfo)
    def create_session(req: SessionCreate) -> SessionInfo:
        try:
            cfg = _resolve_config(req.config, req.preset)
            calibration = calibration_from_entries(req.calibration)
        except (ConfigError, CalibrationError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        session_id = uuid.uuid4().hex[:12]
        sessions[session_id] = _Session(GmPhdTracker(cfg), calibration)
        return SessionInfo(session_id=session_id, frames_processed=0, active_tracks=0)

    def _get_session(session_id: str) -> _Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")
        return session

    @app.post("/sessions/{session_id}/frames", response_model=FrameResponse)
    def push_frame(session_id: str, req: FrameRequest) -> FrameResponse:
        session = _get_session(session_id)
        with session.lock:
            if req.frame <= session.last_frame:
                raise HTTPException(
                    status_code=422,
                    detail=f"frame {req.frame} is not after {session.last_frame}")
            decoded = []
            try:
                for i, det in enumerate(req.detections):
                    if det.frame != req.frame:
                        raise pipeline.InputFormatError(
                            f"detection {i} is for frame {det.frame}, not {req.frame}")
                    row = det.to_record()
                    decoded.append((det.sensor, det.kind, row, f"<detection {i}>"))
                if session.last_frame < 0:
                    # first frame sets the session clock
                    session.tracker.frame = req.frame - 1
                    session.last_frame = req.frame - 1
                while session.last_frame + 1 < req.frame:
                    session.tracker.step([])
                    session.last_frame += 1
                measurements = pipeline.frame_measurements(
                    decoded, session.calibration, session.cfg)
                clusters = pipeline.frame_clusters(measurements, session.cfg)
                outputs = session.tracker.step(clusters)
                session.last_frame = req.frame
            except pipeline.InputFormatError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
        return FrameResponse(frame=req.frame, tracks=[o.to_row() for o in outputs])

    @app.get("/sessions/{session_id}", response_model=SessionInfo)
    def session_info(session_id: str) -> SessionInfo:
        session = _get_session(session_id)
        active = sum(1 for rec in session.tracker.records.values()
                     if rec.state is TrackState.CONFIRMED)
        return SessionInfo(session_id=session_id,
                           frames_processed=session.last_frame + 1,
                           active_tracks=active)

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str) -> dict:
        _get_session(session_id)
        del sessions[session_id]
        return {"deleted": session_id}

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate(req: EvaluateRequest) -> EvaluateResponse:
        try:
            eval_cfg = (config_from_dict(req.config)[1] if req.config is not None
                        else EvalConfig())
            report = pipeline.evaluate_rows(
                [t.model_dump() for t in req.tracks],
                [g.model_dump() for g in req.gt], eval_cfg)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except EvaluationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        d = report.to_dict()
        d.pop("GOSPA_per_frame")
        d.pop("mean_match_distance")
        return EvaluateResponse(**d)

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest) -> SimulateResponse:
        try:
            scenario = generate_scenario(req.spec, req.seed)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return SimulateResponse(
            gt=scenario.gt_rows(),
            detections=pipeline.detection_rows_from_scenario(scenario, req.seed),
            calibration=pipeline.calibration_entries_from_scenario(scenario))

    @app.post("/calibrate-nees")
    def calibrate_nees(req: EvaluateRequest) -> dict:
        try:
            eval_cfg = (config_from_dict(req.config)[1] if req.config is not None
                        else EvalConfig())
            report = pipeline.calibrate_nees_rows(
                [t.model_dump() for t in req.tracks],
                [g.model_dump() for g in req.gt], eval_cfg)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except EvaluationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return report.to_dict()

    return app


app = create_app()
