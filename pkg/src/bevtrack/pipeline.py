"""Orchestration: ingestion, per-frame pipeline runs, sweeps, calibration.

The per-frame pipeline is geometry -> cascaded clustering -> fusion ->
tracker step, with outputs flushed frame by frame so memory stays bounded
by one frame's detections plus the filter state.

Detection streams are JSON Lines with one record per detection:
  camera: {frame, sensor, kind: "camera", bbox: [u1,v1,u2,v2], confidence,
           class, feature?: [...], depth_hint?: {depth, confident}}
  radar:  {frame, sensor, kind: "radar", r, theta, doppler, rcs?}
  bev:    {frame, sensor, kind: "bev", z: [x,y], cov: [4 row-major],
           cov_pose?: [4 row-major], confidence?, class?, feature?: [...]}
The bev kind is the sensor-agnostic interface made literal: such records
bypass the geometry front-end entirely.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

import numpy as np

from . import association, fusion, geometry, metrics
from .config import ConfigError, EvalConfig, TrackerConfig, load_config, set_param
from .geometry import (BevMeasurement, CameraModel, DepthHint, PixelDetection,
                       RadarPoint, RadarPose)
from .metrics import EvalReport, EvaluationError, NeesReport
from .phd import GmPhdTracker
from .sim import Scenario, render_camera_detections, render_radar_detections


class InputFormatError(ValueError):
    """Malformed detection/ground-truth record or unknown sensor."""


@dataclass
class RunManifest:
    config_hash: str
    config_path: str | None = None
    detections_path: str | None = None
    calibration_path: str | None = None
    out_path: str | None = None
    seed: int | None = None
    sensors: list[str] = field(default_factory=list)
    n_frames: int = 0
    n_records: int = 0
    stage_seconds: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "config_path": self.config_path,
            "detections_path": self.detections_path,
            "calibration_path": self.calibration_path,
            "out_path": self.out_path,
            "seed": self.seed,
            "sensors": self.sensors,
            "n_frames": self.n_frames,
            "n_records": self.n_records,
            "stage_seconds": self.stage_seconds,
        }


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputFormatError(f"{path}:{line_no}: invalid JSON: {exc}") from exc


def write_jsonl(rows: Iterable[dict], path: str | Path) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def _config_hash(cfg: TrackerConfig, config_path: str | Path | None) -> str:
    if config_path is not None:
        return hashlib.sha256(Path(config_path).read_bytes()).hexdigest()
    blob = json.dumps(cfg.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


# --- record decoding ---------------------------------------------------------


def _decode_record(obj: dict, where: str) -> tuple[int, str, str, dict]:
    try:
        frame = int(obj["frame"])
        sensor = str(obj["sensor"])
        kind = str(obj.get("kind", "camera"))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputFormatError(f"{where}: bad record header: {exc}") from exc
    if frame < 0:
        raise InputFormatError(f"{where}: negative frame {frame}")
    if kind not in ("camera", "radar", "bev"):
        raise InputFormatError(f"{where}: unknown kind {kind!r}")
    return frame, sensor, kind, obj


def _record_to_input(sensor: str, kind: str, obj: dict, where: str,
                     calibration: dict[str, CameraModel | RadarPose]):
    """Decode one record into the front-end input object for its kind."""
    try:
        if kind == "camera":
            cal = calibration.get(sensor)
            if not isinstance(cal, CameraModel):
                known = sorted(calibration)
                raise InputFormatError(
                    f"{where}: unknown camera sensor {sensor!r}; known sensors: {known}")
            feature = obj.get("feature")
            hint = obj.get("depth_hint")
            return PixelDetection(
                bbox=tuple(float(v) for v in obj["bbox"]),
                confidence=float(obj["confidence"]),
                obj_class=str(obj.get("class", "object")),
                camera_id=sensor,
                feature=np.array(feature, dtype=float) if feature else None,
                depth_hint=DepthHint(float(hint["depth"]), bool(hint.get("confident", False)))
                if hint else None)
        if kind == "radar":
            cal = calibration.get(sensor)
            if not isinstance(cal, RadarPose):
                known = sorted(calibration)
                raise InputFormatError(
                    f"{where}: unknown radar sensor {sensor!r}; known sensors: {known}")
            return RadarPoint(
                range_m=float(obj["r"]), azimuth=float(obj["theta"]),
                doppler=float(obj["doppler"]), rcs=float(obj.get("rcs", 0.0)),
                yaw=cal.yaw, origin=cal.origin)
        feature = obj.get("feature")
        cov = np.array(obj["cov"], dtype=float).reshape(2, 2)
        cov_pose = (np.array(obj["cov_pose"], dtype=float).reshape(2, 2)
                    if "cov_pose" in obj else np.zeros((2, 2)))
        return BevMeasurement(
            z=np.array(obj["z"], dtype=float).reshape(2),
            r_indep=cov, r_pose=cov_pose,
            confidence=float(obj.get("confidence", 1.0)),
            obj_class=str(obj.get("class", "object")),
            sensor_id=sensor,
            feature=np.array(feature, dtype=float) if feature else None)
    except InputFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InputFormatError(f"{where}: malformed {kind} record: {exc}") from exc


def _group_by_frame(records: Iterable[tuple[int, dict]], where_prefix: str,
                    ) -> Iterator[tuple[int, list[tuple[str, str, dict, str]]]]:
    """Yield (frame, decoded records); frames must be nondecreasing."""
    current: int | None = None
    bucket: list = []
    for line_no, obj in records:
        where = f"{where_prefix}:{line_no}"
        frame, sensor, kind, obj = _decode_record(obj, where)
        if current is None:
            current = frame
        elif frame < current:
            raise InputFormatError(
                f"{where}: frame {frame} decreases below {current}")
        elif frame > current:
            yield current, bucket
            bucket = []
            current = frame
        bucket.append((sensor, kind, obj, where))
    if current is not None:
        yield current, bucket


def frame_measurements(decoded: list, calibration: dict,
                       cfg: TrackerConfig) -> list[BevMeasurement]:
    """Convert one frame's records into BEV measurements."""
    measurements: list[BevMeasurement] = []
    radar_groups: dict[str, list[RadarPoint]] = {}
    for sensor, kind, obj, where in decoded:
        item = _record_to_input(sensor, kind, obj, where, calibration)
        if kind == "camera":
            if item.confidence < cfg.tau_yolo:
                continue
            cam = calibration[sensor]
            meas = geometry.camera_detection_to_measurement(item, cam, cfg)
            if meas is not None:
                measurements.append(meas)
        elif kind == "radar":
            radar_groups.setdefault(sensor, []).append(item)
        else:
            measurements.append(item)
    for sensor in sorted(radar_groups):
        measurements.extend(geometry.radar_frame_to_measurements(
            radar_groups[sensor], cfg, sensor_id=sensor))
    return measurements


def frame_clusters(measurements: list[BevMeasurement],
                   cfg: TrackerConfig) -> list[fusion.FusedCluster]:
    clusters = []
    for raw in association.cascaded_cluster(measurements, cfg):
        members = [measurements[i] for i in raw.members]
        clusters.append(fusion.fuse_cluster(members, pass_label=raw.pass_label))
    return clusters


@dataclass
class _RunState:
    stages: dict[str, float] = field(default_factory=lambda: {
        "geometry": 0.0, "clustering": 0.0, "tracking": 0.0})
    sensors: set[str] = field(default_factory=set)
    n_records: int = 0
    n_frames: int = 0


def iter_tracking(records: Iterable[tuple[int, dict]],
                  calibration: dict[str, CameraModel | RadarPose],
                  cfg: TrackerConfig, *,
                  where_prefix: str = "<records>",
                  state: _RunState | None = None,
                  ) -> Iterator[list[dict]]:
    """Run the pipeline over a detection stream, yielding rows per frame.

    Memory stays bounded by one frame's detections plus the filter state.
    Frames with no detections between observed frames still advance the
    filter (pure prediction plus miss penalties).
    """
    tracker = GmPhdTracker(cfg)
    state = state if state is not None else _RunState()
    expected = None
    for frame, decoded in _group_by_frame(records, where_prefix):
        if expected is None:
            tracker.frame = frame - 1  # output frames follow the input clock
        else:
            while expected < frame:
                yield [o.to_row() for o in tracker.step([])]
                state.n_frames += 1
                expected += 1
        expected = frame + 1
        state.n_records += len(decoded)
        state.sensors.update(sensor for sensor, _, _, _ in decoded)
        t0 = time.perf_counter()
        measurements = frame_measurements(decoded, calibration, cfg)
        t1 = time.perf_counter()
        clusters = frame_clusters(measurements, cfg)
        t2 = time.perf_counter()
        outputs = tracker.step(clusters)
        t3 = time.perf_counter()
        state.stages["geometry"] += t1 - t0
        state.stages["clustering"] += t2 - t1
        state.stages["tracking"] += t3 - t2
        state.n_frames += 1
        yield [o.to_row() for o in outputs]


def _manifest_from_state(state: _RunState, cfg: TrackerConfig,
                         config_path, seed) -> RunManifest:
    return RunManifest(
        config_hash=_config_hash(cfg, config_path),
        config_path=str(config_path) if config_path else None,
        seed=seed, sensors=sorted(state.sensors),
        n_frames=state.n_frames, n_records=state.n_records,
        stage_seconds={k: round(v, 6) for k, v in state.stages.items()})


def run_tracking(records: Iterable[tuple[int, dict]],
                 calibration: dict[str, CameraModel | RadarPose],
                 cfg: TrackerConfig, *,
                 where_prefix: str = "<records>",
                 config_path: str | Path | None = None,
                 seed: int | None = None,
                 ) -> tuple[list[dict], RunManifest]:
    """As iter_tracking, but collecting all output rows."""
    state = _RunState()
    out_rows: list[dict] = []
    for frame_rows in iter_tracking(records, calibration, cfg,
                                    where_prefix=where_prefix, state=state):
        out_rows.extend(frame_rows)
    return out_rows, _manifest_from_state(state, cfg, config_path, seed)


def track_file(detections_path: str | Path, calib_path: str | Path,
               out_path: str | Path, config_path: str | Path | None = None,
               preset_name: str | None = None) -> RunManifest:
    """File-to-file tracking run; output is flushed frame by frame."""
    cfg = _load_tracker_config(config_path, preset_name)[0]
    calibration = geometry.load_calibration(calib_path)
    state = _RunState()
    with open(out_path, "w") as out:
        for frame_rows in iter_tracking(read_jsonl(detections_path), calibration,
                                        cfg, where_prefix=str(detections_path),
                                        state=state):
            for row in frame_rows:
                out.write(json.dumps(row) + "\n")
    manifest = _manifest_from_state(state, cfg, config_path, None)
    manifest.detections_path = str(detections_path)
    manifest.calibration_path = str(calib_path)
    manifest.out_path = str(out_path)
    manifest_path = Path(str(out_path) + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    return manifest


def _load_tracker_config(config_path, preset_name) -> tuple[TrackerConfig, EvalConfig]:
    from .config import preset as make_preset
    if config_path is not None:
        return load_config(config_path)
    if preset_name is not None:
        return make_preset(preset_name), EvalConfig()
    return TrackerConfig(), EvalConfig()


# --- simulation --------------------------------------------------------------


def detection_rows_from_scenario(scenario: Scenario, seed: int) -> list[dict]:
    """Render every sensor and serialize to detection records, frame-major."""
    per_frame: dict[int, list[dict]] = {f: [] for f in range(scenario.n_frames)}
    for i, cam in enumerate(scenario.cameras):
        frames = render_camera_detections(scenario, cam, seed, stream=1000 + i)
        for f, dets in frames.items():
            for d in dets:
                row = {
                    "frame": f, "sensor": cam.sensor_id, "kind": "camera",
                    "bbox": [float(v) for v in d.bbox],
                    "confidence": d.confidence, "class": d.obj_class,
                }
                if d.feature is not None:
                    row["feature"] = [float(v) for v in d.feature]
                if d.depth_hint is not None:
                    row["depth_hint"] = {"depth": d.depth_hint.depth,
                                         "confident": d.depth_hint.confident}
                per_frame[f].append(row)
    for j, radar in enumerate(scenario.radars):
        frames = render_radar_detections(scenario, radar, seed, stream=2000 + j)
        for f, points in frames.items():
            for p in points:
                per_frame[f].append({
                    "frame": f, "sensor": radar.sensor_id, "kind": "radar",
                    "r": p.range_m, "theta": p.azimuth,
                    "doppler": p.doppler, "rcs": p.rcs})
    rows: list[dict] = []
    for f in range(scenario.n_frames):
        rows.extend(per_frame[f])
    return rows


def calibration_entries_from_scenario(scenario: Scenario) -> list[dict]:
    entries = [geometry.camera_to_entry(c.model) for c in scenario.cameras]
    entries += [geometry.radar_to_entry(r.pose) for r in scenario.radars]
    return entries


def simulate_to_dir(spec: dict, seed: int, out_dir: str | Path) -> dict[str, str]:
    """Generate a scenario and write gt/detections/calibration files."""
    from .sim import generate_scenario
    scenario = generate_scenario(spec, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gt_path = out / "gt.jsonl"
    det_path = out / "detections.jsonl"
    calib_path = out / "calibration.json"
    write_jsonl(scenario.gt_rows(), gt_path)
    write_jsonl(detection_rows_from_scenario(scenario, seed), det_path)
    calib_path.write_text(json.dumps(calibration_entries_from_scenario(scenario),
                                     indent=2) + "\n")
    return {"gt": str(gt_path), "detections": str(det_path),
            "calibration": str(calib_path)}


# --- evaluation --------------------------------------------------------------


def evaluate_rows(trk_rows: list[dict], gt_rows: list[dict],
                  eval_cfg: EvalConfig) -> EvalReport:
    gt_frames = metrics.rows_to_frames(gt_rows, id_key="gt_id")
    trk_frames = metrics.rows_to_frames(trk_rows, id_key="id")
    trk_covs = metrics.rows_to_cov_frames(trk_rows, id_key="id")
    return metrics.evaluate(gt_frames, trk_frames, eval_cfg, trk_covs=trk_covs)


def calibrate_nees_rows(trk_rows: list[dict], gt_rows: list[dict],
                        eval_cfg: EvalConfig) -> NeesReport:
    gt_frames = metrics.rows_to_frames(gt_rows, id_key="gt_id")
    trk_frames = metrics.rows_to_frames(trk_rows, id_key="id")
    if not set(gt_frames) & set(trk_frames):
        raise EvaluationError("track and ground-truth files share no frames")
    trk_covs = metrics.rows_to_cov_frames(trk_rows, id_key="id")
    errors, covs = metrics.match_errors(gt_frames, trk_frames, trk_covs,
                                        eval_cfg.threshold)
    return metrics.nees_calibration(errors, covs, eval_cfg.nees_level)


# --- sweeps --------------------------------------------------------------------


def _run_and_score(detection_rows: list[dict],
                   calibration: dict[str, CameraModel | RadarPose],
                   gt_rows: list[dict], cfg: TrackerConfig,
                   eval_cfg: EvalConfig) -> EvalReport:
    records = ((i + 1, row) for i, row in enumerate(detection_rows))
    trk_rows, _ = run_tracking(records, calibration, cfg)
    return evaluate_rows(trk_rows, gt_rows, eval_cfg)


def _subset_task(args) -> tuple[int, tuple[str, ...], dict]:
    detection_rows, calibration, gt_rows, cfg, eval_cfg, k, subset = args
    rows = [r for r in detection_rows if r["sensor"] in subset]
    report = _run_and_score(rows, calibration, gt_rows, cfg, eval_cfg)
    return k, subset, report.to_dict()


def sweep_dropout(detection_rows: list[dict],
                  calibration: dict[str, CameraModel | RadarPose],
                  gt_rows: list[dict], cfg: TrackerConfig, eval_cfg: EvalConfig,
                  k_min: int, k_max: int, workers: int = 1) -> dict:
    """Rerun tracking on every sensor subset of each size in [k_min, k_max]."""
    sensors = sorted({str(r["sensor"]) for r in detection_rows})
    n = len(sensors)
    if not 1 <= k_min <= k_max:
        raise ConfigError(f"invalid k range [{k_min}, {k_max}]")
    if k_max > n:
        raise ConfigError(f"k_max {k_max} exceeds the {n} available sensors")
    tasks = []
    for k in range(k_min, k_max + 1):
        for subset in itertools.combinations(sensors, k):
            tasks.append((detection_rows, calibration, gt_rows, cfg, eval_cfg,
                          k, subset))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_subset_task, tasks))
    else:
        results = [_subset_task(t) for t in tasks]
    runs = [{"k": k, "sensors": list(subset), "report": rep}
            for k, subset, rep in results]
    aggregate = {}
    for k in range(k_min, k_max + 1):
        reps = [r["report"] for r in runs if r["k"] == k]
        agg = {}
        for key in ("IDF1", "MOTA", "MOTP", "mean_GOSPA"):
            vals = np.array([rep[key] for rep in reps])
            agg[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
        aggregate[k] = agg
    return {"sensors": sensors, "runs": runs, "aggregate": aggregate}


def sweep_param(name: str, values: list, detection_rows: list[dict],
                calibration: dict[str, CameraModel | RadarPose],
                gt_rows: list[dict], cfg: TrackerConfig,
                eval_cfg: EvalConfig) -> list[dict]:
    """One-at-a-time sensitivity: rerun tracking per value of one parameter."""
    rows = []
    for value in values:
        swept = set_param(cfg, name, value)
        report = _run_and_score(detection_rows, calibration, gt_rows, swept, eval_cfg)
        rows.append({"param": name, "value": value,
                     "IDF1": report.idf1, "MOTA": report.mota,
                     "MOTP": report.motp, "mean_GOSPA": report.mean_gospa})
    return rows
