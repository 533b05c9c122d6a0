"""Sensor front-ends: pixel detections and radar polar points to
calibrated BEV measurements.

Each measurement carries its covariance split into an independent part
(depth or polar noise propagated through the projection Jacobian) and a
common-mode part (calibration / ego-pose uncertainty shared by every
detection of a sensor). Fusion shrinks only the independent part, so the
split must be preserved all the way through the pipeline.

World frame convention: the ground plane is horizontal with unit normal
n = [0, 0, 1]; BEV coordinates are the first two world components.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TrackerConfig
from .fusion import information_fuse


class CalibrationError(ValueError):
    """Bad camera/radar calibration (singular K, non-unit plane normal, ...)."""


class DegenerateRayError(ValueError):
    """Viewing ray parallel to the ground plane; detection is unusable."""


class InvalidDetectionError(ValueError):
    """Detection geometry violates its preconditions (e.g. empty box)."""


@dataclass
class CameraModel:
    """Pinhole camera with world-from-camera extrinsics and a ground plane."""

    camera_id: str
    k: np.ndarray                 # 3x3 intrinsics [px]
    r: np.ndarray                 # 3x3 rotation, world-from-camera
    t: np.ndarray                 # 3-vector camera center [m]
    n: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    d_plane: float = 0.0
    f_y: float | None = None      # defaults to K[1,1]

    k_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.k = np.asarray(self.k, dtype=float).reshape(3, 3)
        self.r = np.asarray(self.r, dtype=float).reshape(3, 3)
        self.t = np.asarray(self.t, dtype=float).reshape(3)
        self.n = np.asarray(self.n, dtype=float).reshape(3)
        if abs(np.linalg.norm(self.n) - 1.0) > 1e-9:
            raise CalibrationError(f"camera {self.camera_id}: plane normal must be unit length")
        if np.max(np.abs(self.n - np.array([0.0, 0.0, 1.0]))) > 1e-6:
            raise CalibrationError(
                f"camera {self.camera_id}: world frame must have n = [0,0,1] (horizontal ground)")
        det = np.linalg.det(self.k)
        if abs(det) < 1e-12:
            raise CalibrationError(f"camera {self.camera_id}: singular intrinsics")
        self.k_inv = np.linalg.inv(self.k)
        if self.f_y is None:
            self.f_y = float(self.k[1, 1])


@dataclass
class RadarPose:
    """Mounting pose of one radar in the world BEV frame."""

    sensor_id: str
    yaw: float                    # ego yaw + mount angle [rad]
    origin: np.ndarray            # 2-vector [m]

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float).reshape(2)


@dataclass
class DepthHint:
    """Optional externally supplied depth with a confidence flag."""

    depth: float
    confident: bool = False


@dataclass
class PixelDetection:
    bbox: tuple[float, float, float, float]   # (u1, v1, u2, v2), v down
    confidence: float
    obj_class: str
    camera_id: str
    feature: np.ndarray | None = None
    depth_hint: DepthHint | None = None


@dataclass
class DepthEstimate:
    depth: float                  # [m], along the unnormalized camera ray
    var: float                    # [m^2]


@dataclass
class RadarPoint:
    range_m: float
    azimuth: float                # rad from the forward (longitudinal) axis
    doppler: float                # radial speed [m/s]
    rcs: float                    # [dBsm]
    yaw: float                    # sensor yaw in the world frame [rad]
    origin: np.ndarray            # sensor origin, 2-vector [m]

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float).reshape(2)


@dataclass
class BevMeasurement:
    """The sensor-agnostic interface: calibrated BEV position + covariance."""

    z: np.ndarray                 # 2-vector [m]
    r_indep: np.ndarray           # 2x2, independent part
    r_pose: np.ndarray            # 2x2, common-mode part
    confidence: float
    obj_class: str
    sensor_id: str
    feature: np.ndarray | None = None

    @property
    def r_total(self) -> np.ndarray:
        return self.r_indep + self.r_pose


def floor_eigenvalues(mat: np.ndarray, floor: float) -> np.ndarray:
    """Clamp the eigenvalues of a symmetric 2x2 matrix from below."""
    sym = 0.5 * (mat + mat.T)
    vals, vecs = np.linalg.eigh(sym)
    vals = np.maximum(vals, floor)
    return vecs @ np.diag(vals) @ vecs.T


def _indep_floor(cfg: TrackerConfig) -> float:
    # Floor only the independent term: the common-mode part already
    # contributes sigma_pose^2 to every eigenvalue of the total.
    return max(0.0, cfg.sigma2_min - cfg.sigma_pose ** 2)


def backproject_ray(pixel: tuple[float, float], camera: CameraModel) -> np.ndarray:
    """Camera-frame ray K^-1 [u, v, 1]^T (not normalized)."""
    u, v = pixel
    return camera.k_inv @ np.array([u, v, 1.0])


def footpoint_depth(detection: PixelDetection, camera: CameraModel,
                    cfg: TrackerConfig) -> DepthEstimate:
    """Depth of the box's bottom-center pixel by ray/ground-plane intersection."""
    u1, v1, u2, v2 = detection.bbox
    ray = backproject_ray(((u1 + u2) / 2.0, v2), camera)
    denom = float(camera.n @ (camera.r @ ray))
    if abs(denom) < 1e-12:
        raise DegenerateRayError("viewing ray is parallel to the ground plane")
    lam = (camera.d_plane - float(camera.n @ camera.t)) / denom
    d_fp = abs(lam)
    var = max((cfg.alpha_fp * d_fp) ** 2, cfg.sigma2_min_depth)
    return DepthEstimate(d_fp, var)


def bbox_depth_prior(detection: PixelDetection, camera: CameraModel,
                     h_ref: float, cfg: TrackerConfig) -> DepthEstimate:
    """Depth from apparent box height under the pinhole model."""
    h_px = detection.bbox[3] - detection.bbox[1]
    if h_px <= 0:
        raise InvalidDetectionError(f"non-positive box height {h_px}")
    d_bbox = camera.f_y * h_ref / h_px
    var = max((cfg.alpha_bbox * d_bbox) ** 2, cfg.sigma2_min_depth)
    return DepthEstimate(d_bbox, var)


def fuse_depth(fp: DepthEstimate, bbox: DepthEstimate,
               hint: DepthHint | None, cfg: TrackerConfig) -> DepthEstimate:
    """Precision-weighted combination of the two geometric depth cues.

    The footpoint cue gets an extra trust factor eta_fp. A confident
    external depth hint that disagrees by more than hint_disagree_m only
    inflates the variance; it never moves the estimate.
    """
    w_fp = cfg.eta_fp / fp.var
    w_bb = 1.0 / bbox.var
    d_hat = (w_fp * fp.depth + w_bb * bbox.depth) / (w_fp + w_bb)
    var = max((cfg.alpha_fp * abs(d_hat)) ** 2, cfg.sigma2_min_depth)
    if hint is not None and hint.confident and abs(hint.depth - abs(d_hat)) > cfg.hint_disagree_m:
        var *= cfg.gamma_inflate
    return DepthEstimate(d_hat, var)


def bev_depth_jacobian(pixel: tuple[float, float], camera: CameraModel) -> np.ndarray:
    """d z_BEV / d depth: the first two rows of R_c K^-1 [u, v, 1]^T.

    The orthogonal projection onto the horizontal ground plane only kills
    the vertical component, so no extra in-plane factor appears.
    """
    return (camera.r @ backproject_ray(pixel, camera))[:2]


def project_to_bev(pixel: tuple[float, float], depth: DepthEstimate,
                   camera: CameraModel, cfg: TrackerConfig, *,
                   confidence: float = 1.0, obj_class: str = "object",
                   feature: np.ndarray | None = None,
                   sensor_id: str | None = None) -> BevMeasurement:
    """Project a pixel at an estimated depth onto the ground plane.

    The scalar depth variance is pushed through the projection Jacobian
    into a rank-1 BEV term, which is then eigenvalue-floored so the total
    covariance never gates tighter than sigma2_min.
    """
    ray = backproject_ray(pixel, camera)
    x_w = camera.r @ (depth.depth * ray) + camera.t
    x_proj = x_w + (camera.d_plane - float(camera.n @ x_w)) * camera.n
    jac = (camera.r @ ray)[:2]
    r_depth = depth.var * np.outer(jac, jac)
    r_indep = floor_eigenvalues(r_depth, _indep_floor(cfg))
    r_pose = cfg.sigma_pose ** 2 * np.eye(2)
    return BevMeasurement(
        z=x_proj[:2].copy(), r_indep=r_indep, r_pose=r_pose,
        confidence=confidence, obj_class=obj_class, feature=feature,
        sensor_id=sensor_id if sensor_id is not None else camera.camera_id)


def camera_detection_to_measurement(detection: PixelDetection, camera: CameraModel,
                                    cfg: TrackerConfig) -> BevMeasurement | None:
    """Full camera chain: depth cues -> fused depth -> BEV measurement.

    Returns None for detections whose viewing ray is parallel to the
    ground plane (they carry no usable position).
    """
    try:
        fp = footpoint_depth(detection, camera, cfg)
    except DegenerateRayError:
        return None
    bb = bbox_depth_prior(detection, camera, cfg.h_ref_for(detection.obj_class), cfg)
    fused = fuse_depth(fp, bb, detection.depth_hint, cfg)
    u1, v1, u2, v2 = detection.bbox
    feature = detection.feature
    if feature is not None:
        norm = np.linalg.norm(feature)
        feature = feature / norm if norm > 0 else None
    return project_to_bev(
        ((u1 + u2) / 2.0, v2), fused, camera, cfg,
        confidence=detection.confidence, obj_class=detection.obj_class,
        feature=feature, sensor_id=detection.camera_id)


# --- radar -----------------------------------------------------------------


def radar_local_covariance(range_m: float, azimuth: float,
                           sigma_r: float, sigma_theta: float) -> np.ndarray:
    """Sensor-local Cartesian covariance of one polar return.

    First-order propagation through (x, y) = (r sin th, r cos th).
    """
    s, c = math.sin(azimuth), math.cos(azimuth)
    jac = np.array([[s, range_m * c],
                    [c, -range_m * s]])
    return jac @ np.diag([sigma_r ** 2, sigma_theta ** 2]) @ jac.T


def radar_point_to_bev(point: RadarPoint, sigma_r: float, sigma_theta: float,
                       sigma_pose: float, cfg: TrackerConfig, *,
                       confidence: float = 1.0,
                       obj_class: str | None = None,
                       sensor_id: str | None = None) -> BevMeasurement:
    """One polar return to a world-frame BEV measurement."""
    if point.range_m <= 0:
        raise InvalidDetectionError(f"non-positive radar range {point.range_m}")
    local = point.range_m * np.array([math.sin(point.azimuth), math.cos(point.azimuth)])
    c, s = math.cos(point.yaw), math.sin(point.yaw)
    rot = np.array([[c, -s], [s, c]])
    z = point.origin + rot @ local
    r_local = radar_local_covariance(point.range_m, point.azimuth, sigma_r, sigma_theta)
    r_world = rot @ r_local @ rot.T
    floor = max(0.0, cfg.sigma2_min - sigma_pose ** 2)
    return BevMeasurement(
        z=z, r_indep=floor_eigenvalues(r_world, floor),
        r_pose=sigma_pose ** 2 * np.eye(2),
        confidence=confidence,
        obj_class=obj_class if obj_class is not None else cfg.radar_class,
        sensor_id=sensor_id if sensor_id is not None else "radar")


def dbscan_labels(points: np.ndarray, eps: float, min_samples: int) -> np.ndarray:
    """Plain DBSCAN on small point sets; -1 marks noise.

    Neighbor counts include the point itself.
    """
    n = len(points)
    labels = np.full(n, -1, dtype=int)
    if n == 0:
        return labels
    d = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    neighbors = [np.flatnonzero(d[i] <= eps) for i in range(n)]
    core = np.array([len(nb) >= min_samples for nb in neighbors])
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        stack = [i]
        labels[i] = cluster
        while stack:
            j = stack.pop()
            if not core[j]:
                continue
            for k in neighbors[j]:
                if labels[k] == -1:
                    labels[k] = cluster
                    stack.append(int(k))
        cluster += 1
    return labels


def radar_frame_to_measurements(points: list[RadarPoint], cfg: TrackerConfig,
                                sensor_id: str = "radar") -> list[BevMeasurement]:
    """One radar frame to object-level measurements.

    Stationary returns (|Doppler| < v_min) are dropped, the rest are
    DBSCAN-grouped in BEV, and each group is collapsed by precision
    weighting of the per-point measurements (the common-mode term is
    shared, so it is added back once). Cluster confidence saturates with
    the member count.
    """
    moving = [p for p in points if abs(p.doppler) >= cfg.v_min]
    if not moving:
        return []
    sigma_theta = cfg.sigma_theta
    members = [radar_point_to_bev(p, cfg.sigma_r, sigma_theta, cfg.sigma_pose, cfg,
                                  sensor_id=sensor_id) for p in moving]
    labels = dbscan_labels(np.array([m.z for m in members]), cfg.eps_dbscan, cfg.n_min)
    out: list[BevMeasurement] = []
    for lab in sorted(set(labels)):
        if lab < 0:
            continue
        group = [members[i] for i in np.flatnonzero(labels == lab)]
        z, p_indep = information_fuse(
            np.array([m.z for m in group]), np.array([m.r_indep for m in group]))
        floor = max(0.0, cfg.sigma2_min - cfg.sigma_pose ** 2)
        out.append(BevMeasurement(
            z=z, r_indep=floor_eigenvalues(p_indep, floor),
            r_pose=cfg.sigma_pose ** 2 * np.eye(2),
            confidence=min(1.0, len(group) / 4.0),
            obj_class=cfg.radar_class, sensor_id=sensor_id))
    return out


# --- calibration files -----------------------------------------------------


def load_calibration(path: str | Path) -> dict[str, CameraModel | RadarPose]:
    """Load the sensor calibration file.

    The file is a JSON array; each entry is a camera object
    {id, K: 9 row-major, R: 9 row-major, t: 3, n: 3, d_plane, f_y?} or,
    with "kind": "radar", a radar pose {id, yaw, origin: 2}.
    """
    try:
        entries = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CalibrationError(f"calibration {path}: invalid JSON: {exc}") from exc
    return calibration_from_entries(entries)


def calibration_from_entries(entries: list[dict]) -> dict[str, CameraModel | RadarPose]:
    if not isinstance(entries, list):
        raise CalibrationError("calibration must be a JSON array of sensor objects")
    sensors: dict[str, CameraModel | RadarPose] = {}
    for i, entry in enumerate(entries):
        try:
            sensor_id = str(entry["id"])
            kind = entry.get("kind", "camera")
            if kind == "camera":
                sensors[sensor_id] = CameraModel(
                    camera_id=sensor_id,
                    k=np.array(entry["K"], dtype=float).reshape(3, 3),
                    r=np.array(entry["R"], dtype=float).reshape(3, 3),
                    t=np.array(entry["t"], dtype=float),
                    n=np.array(entry.get("n", [0.0, 0.0, 1.0]), dtype=float),
                    d_plane=float(entry.get("d_plane", 0.0)),
                    f_y=float(entry["f_y"]) if "f_y" in entry else None)
            elif kind == "radar":
                sensors[sensor_id] = RadarPose(
                    sensor_id=sensor_id, yaw=float(entry["yaw"]),
                    origin=np.array(entry["origin"], dtype=float))
            else:
                raise CalibrationError(f"entry {i}: unknown sensor kind {kind!r}")
        except (KeyError, ValueError, TypeError) as exc:
            if isinstance(exc, CalibrationError):
                raise
            raise CalibrationError(f"calibration entry {i}: {exc}") from exc
    return sensors


def camera_to_entry(camera: CameraModel) -> dict:
    return {
        "id": camera.camera_id,
        "K": [float(x) for x in camera.k.ravel()],
        "R": [float(x) for x in camera.r.ravel()],
        "t": [float(x) for x in camera.t],
        "n": [float(x) for x in camera.n],
        "d_plane": camera.d_plane,
        "f_y": camera.f_y,
    }


def radar_to_entry(pose: RadarPose) -> dict:
    return {
        "id": pose.sensor_id,
        "kind": "radar",
        "yaw": pose.yaw,
        "origin": [float(x) for x in pose.origin],
    }
