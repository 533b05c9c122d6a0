"""Deterministic synthetic multi-sensor scenarios.

Generates ground-truth trajectories plus camera-like and radar-like
detections whose noise matches the measurement models of the geometry
front-ends. Randomness is drawn from counter-style generators split per
(sensor, frame), so rerunning with a subset of the sensors reproduces
exactly the noise of the full run for the sensors that remain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError
from .geometry import CameraModel, DepthHint, PixelDetection, RadarPoint, RadarPose


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass
class TargetTruth:
    target_id: int
    obj_class: str
    height: float
    birth: int
    death: int                        # exclusive
    states: np.ndarray                # (n_frames, 4): x, y, vx, vy; NaN when dead
    feature: np.ndarray

    def alive(self, frame: int) -> bool:
        return self.birth <= frame < self.death


@dataclass
class CameraSensor:
    sensor_id: str
    model: CameraModel
    image_size: tuple[int, int] = (1920, 1080)
    pixel_noise: float = 0.0
    p_detect: float = 1.0
    clutter_rate: float = 0.0
    confidence: tuple[float, float] = (0.7, 0.95)
    clutter_confidence: tuple[float, float] = (0.2, 0.7)
    feature_noise: float = 0.1
    occlusion_radius: float = 0.0
    depth_hints: bool = False


@dataclass
class RadarSensor:
    sensor_id: str
    pose: RadarPose
    sigma_r: float = 0.10
    sigma_theta_deg: float = 1.8
    doppler_noise: float = 0.1
    p_detect: float = 1.0
    clutter_rate: float = 0.0
    points_per_target: tuple[int, int] = (1, 5)


@dataclass
class Scenario:
    seed: int
    arena: tuple[float, float, float, float]   # xmin, xmax, ymin, ymax
    n_frames: int
    dt: float
    targets: list[TargetTruth]
    cameras: list[CameraSensor] = field(default_factory=list)
    radars: list[RadarSensor] = field(default_factory=list)

    def gt_frames(self) -> dict[int, dict[int, np.ndarray]]:
        table: dict[int, dict[int, np.ndarray]] = {}
        for t in self.targets:
            for f in range(t.birth, t.death):
                table.setdefault(f, {})[t.target_id] = t.states[f, :2].copy()
        return table

    def gt_rows(self) -> list[dict]:
        rows = []
        for f in range(self.n_frames):
            for t in self.targets:
                if t.alive(f):
                    rows.append({"frame": f, "gt_id": t.target_id,
                                 "x": float(t.states[f, 0]),
                                 "y": float(t.states[f, 1])})
        return rows


def look_at_camera(camera_id: str, position: np.ndarray, target: np.ndarray,
                   focal: float, image_size: tuple[int, int]) -> CameraModel:
    """Pinhole camera at `position` whose optical axis points at `target`."""
    w, h = image_size
    k = np.array([[focal, 0.0, w / 2.0],
                  [0.0, focal, h / 2.0],
                  [0.0, 0.0, 1.0]])
    forward = target - position
    forward = forward / np.linalg.norm(forward)
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    norm = np.linalg.norm(right)
    if norm < 1e-9:  # looking straight down: pick a fixed right axis
        right = np.array([1.0, 0.0, 0.0])
    else:
        right = right / norm
    down = np.cross(forward, right)
    if down[2] > 0:
        right, down = -right, -down
    rot = np.column_stack([right, down, forward])   # world-from-camera
    return CameraModel(camera_id=camera_id, k=k, r=rot, t=position.copy())


_MODE_IDS = (1, 2, 3)


def _simulate_joint(rng: np.random.Generator, arena, n_frames: int, dt: float,
                    inits: list[np.ndarray], mode: str, process_noise: float,
                    pi_stay: tuple[float, float, float],
                    avoid_radius: float = 0.0) -> list[np.ndarray]:
    """Integrate all targets forward together, reflecting at the bounds.

    With avoid_radius > 0 targets steer away from close neighbors
    (heading changes only, speed preserved), the way pedestrians do;
    this keeps deep interpenetration rare without making paths trivial.
    """
    xmin, xmax, ymin, ymax = arena
    n = len(inits)
    states = [np.zeros((n_frames, 4)) for _ in range(n)]
    current = [init.astype(float).copy() for init in inits]
    modes = [2] * n
    for f in range(n_frames):
        for i in range(n):
            states[i][f] = current[i]
        for i in range(n):
            x, y, vx, vy = current[i]
            if mode == "markov":
                stay = pi_stay[modes[i] - 1]
                if rng.random() > stay:
                    modes[i] = int(rng.choice([m for m in _MODE_IDS if m != modes[i]]))
                if modes[i] == 1:
                    vx *= 0.5
                    vy *= 0.5
                elif modes[i] == 3:
                    vx += rng.normal(0.0, 0.6)
                    vy += rng.normal(0.0, 0.6)
            if process_noise > 0:
                vx += rng.normal(0.0, process_noise * dt)
                vy += rng.normal(0.0, process_noise * dt)
            if avoid_radius > 0:
                speed = math.hypot(vx, vy)
                push = np.zeros(2)
                for j in range(n):
                    if j == i:
                        continue
                    away = current[i][:2] - current[j][:2]
                    dist = float(np.linalg.norm(away))
                    if 1e-9 < dist < avoid_radius:
                        push += away / dist * (avoid_radius - dist)
                if push.any() and speed > 1e-9:
                    vel = np.array([vx, vy]) + push
                    vel *= speed / (np.linalg.norm(vel) + 1e-12)
                    vx, vy = vel
            x += vx * dt
            y += vy * dt
            if x < xmin or x > xmax:
                vx = -vx
                x = min(max(x, xmin), xmax)
            if y < ymin or y > ymax:
                vy = -vy
                y = min(max(y, ymin), ymax)
            current[i] = np.array([x, y, vx, vy])
    return states


def generate_scenario(spec: dict, seed: int) -> Scenario:
    """Build a deterministic scenario from its JSON spec and a seed."""
    arena = tuple(float(v) for v in spec.get("arena", (-15.0, 15.0, -15.0, 15.0)))
    if len(arena) != 4 or arena[0] >= arena[1] or arena[2] >= arena[3]:
        raise ConfigError(f"invalid arena bounds {arena}")
    n_frames = int(spec.get("n_frames", 100))
    dt = float(spec.get("dt", 0.5))
    targets = _build_targets(spec.get("targets", {"count": 5}), arena, n_frames, dt, seed)
    cameras = _build_cameras(spec.get("cameras", {}), arena)
    radars = _build_radars(spec.get("radars", {}), arena)
    return Scenario(seed=seed, arena=arena, n_frames=n_frames, dt=dt,
                    targets=targets, cameras=cameras, radars=radars)


def _unit_feature(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def _build_targets(spec, arena, n_frames: int, dt: float, seed: int) -> list[TargetTruth]:
    rng = _rng(seed, 0)
    xmin, xmax, ymin, ymax = arena
    targets: list[TargetTruth] = []
    if isinstance(spec, list):
        for i, entry in enumerate(spec):
            init = np.array(entry["state"], dtype=float)
            states = _simulate_joint(rng, arena, n_frames, dt, [init],
                                     entry.get("mode", "cv"),
                                     float(entry.get("process_noise", 0.0)),
                                     tuple(entry.get("pi_stay", (0.75, 0.94, 0.10))))[0]
            dim = int(entry.get("feature_dim", 16))
            feature = (np.array(entry["feature"], dtype=float)
                       if "feature" in entry else _unit_feature(rng, dim))
            targets.append(TargetTruth(
                target_id=int(entry.get("id", i + 1)),
                obj_class=entry.get("class", "pedestrian"),
                height=float(entry.get("height", 1.7)),
                birth=int(entry.get("birth", 0)),
                death=int(entry.get("death", n_frames)),
                states=states, feature=feature / np.linalg.norm(feature)))
        return targets

    count = int(spec.get("count", 5))
    obj_class = spec.get("class", "pedestrian")
    height = float(spec.get("height", 1.7))
    speed_lo, speed_hi = spec.get("speed", (0.6, 1.4))
    mode = spec.get("mode", "cv")
    pattern = spec.get("pattern", "random")
    process_noise = float(spec.get("process_noise", 0.0))
    min_sep = float(spec.get("min_separation", 2.0))
    avoid_radius = float(spec.get("avoid_radius", 0.0))
    dim = int(spec.get("feature_dim", 16))
    pi_stay = tuple(spec.get("pi_stay", (0.75, 0.94, 0.10)))

    inits = []
    if pattern == "lanes":
        # Parallel constant-y lanes: separation is preserved for all time.
        gap = (ymax - ymin) / (count + 1)
        for i in range(count):
            y = ymin + (i + 1) * gap
            x = float(rng.uniform(xmin + 1.0, xmax - 1.0))
            speed = float(rng.uniform(speed_lo, speed_hi))
            direction = 1.0 if i % 2 == 0 else -1.0
            inits.append(np.array([x, y, direction * speed, 0.0]))
    else:
        placed: list[np.ndarray] = []
        for _ in range(count):
            for _attempt in range(200):
                pos = np.array([rng.uniform(xmin + 1.0, xmax - 1.0),
                                rng.uniform(ymin + 1.0, ymax - 1.0)])
                if all(np.linalg.norm(pos - p) >= min_sep for p in placed):
                    break
            placed.append(pos)
            speed = float(rng.uniform(speed_lo, speed_hi))
            heading = float(rng.uniform(0.0, 2.0 * math.pi))
            inits.append(np.array([pos[0], pos[1],
                                   speed * math.cos(heading),
                                   speed * math.sin(heading)]))

    all_states = _simulate_joint(rng, arena, n_frames, dt, inits, mode,
                                 process_noise, pi_stay, avoid_radius)
    for i, states in enumerate(all_states):
        targets.append(TargetTruth(
            target_id=i + 1, obj_class=obj_class, height=height,
            birth=0, death=n_frames, states=states,
            feature=_unit_feature(rng, dim)))
    return targets


def _build_cameras(spec, arena) -> list[CameraSensor]:
    if isinstance(spec, list):
        raise ConfigError("explicit camera lists are not supported; use the layout spec")
    count = int(spec.get("count", 0))
    if count == 0:
        return []
    xmin, xmax, ymin, ymax = arena
    center = np.array([(xmin + xmax) / 2.0, (ymin + ymax) / 2.0, 0.0])
    radius = max(xmax - xmin, ymax - ymin) * 0.62 + float(spec.get("margin", 2.0))
    height = float(spec.get("height", 6.0))
    image_size = tuple(int(v) for v in spec.get("image_size", (1920, 1080)))
    focal = float(spec.get("focal", 900.0))
    sensors = []
    for i in range(count):
        angle = 2.0 * math.pi * i / count
        pos = center + np.array([radius * math.cos(angle),
                                 radius * math.sin(angle), height])
        model = look_at_camera(f"cam{i}", pos, center, focal, image_size)
        sensors.append(CameraSensor(
            sensor_id=f"cam{i}", model=model, image_size=image_size,
            pixel_noise=float(spec.get("pixel_noise", 0.0)),
            p_detect=float(spec.get("p_detect", 1.0)),
            clutter_rate=float(spec.get("clutter", 0.0)),
            confidence=tuple(spec.get("confidence", (0.7, 0.95))),
            clutter_confidence=tuple(spec.get("clutter_confidence", (0.2, 0.7))),
            feature_noise=float(spec.get("feature_noise", 0.1)),
            occlusion_radius=float(spec.get("occlusion_radius", 0.0)),
            depth_hints=bool(spec.get("depth_hints", False))))
    return sensors


def _build_radars(spec, arena) -> list[RadarSensor]:
    count = int(spec.get("count", 0))
    if count == 0:
        return []
    xmin, xmax, ymin, ymax = arena
    center = np.array([(xmin + xmax) / 2.0, (ymin + ymax) / 2.0])
    corners = [np.array([xmin, ymin]), np.array([xmax, ymin]),
               np.array([xmax, ymax]), np.array([xmin, ymax])]
    sensors = []
    for i in range(count):
        origin = corners[i % 4] + (center - corners[i % 4]) * 0.05
        to_center = center - origin
        yaw = math.atan2(to_center[0], to_center[1])  # forward axis is +y local
        sensors.append(RadarSensor(
            sensor_id=f"radar{i}",
            pose=RadarPose(sensor_id=f"radar{i}", yaw=yaw, origin=origin),
            sigma_r=float(spec.get("sigma_r", 0.10)),
            sigma_theta_deg=float(spec.get("sigma_theta_deg", 1.8)),
            doppler_noise=float(spec.get("doppler_noise", 0.1)),
            p_detect=float(spec.get("p_detect", 1.0)),
            clutter_rate=float(spec.get("clutter", 0.0))))
    return sensors


def _camera_point(model: CameraModel, world: np.ndarray) -> tuple[np.ndarray, float]:
    cam = model.r.T @ (world - model.t)
    depth = float(cam[2])
    if depth <= 1e-6:
        return np.array([math.nan, math.nan]), depth
    px = model.k @ (cam / depth)
    return px[:2], depth


def _occluded(scenario: Scenario, cam: CameraSensor, target: TargetTruth,
              frame: int) -> bool:
    """Another target's body blocks the viewing ray at smaller depth.

    The occluder is represented by its mid-body point (foot + height/2),
    since a ground-level point would sit below any elevated camera's ray.
    """
    if cam.occlusion_radius <= 0:
        return False
    model = cam.model
    foot = np.array([*target.states[frame, :2], 0.0])
    ray = foot - model.t
    length = np.linalg.norm(ray)
    for other in scenario.targets:
        if other.target_id == target.target_id or not other.alive(frame):
            continue
        opos = np.array([*other.states[frame, :2], other.height / 2.0])
        s = float((opos - model.t) @ ray) / (length ** 2)
        if not 0.0 < s < 1.0:
            continue
        perp = opos - (model.t + s * ray)
        if np.linalg.norm(perp) < cam.occlusion_radius:
            return True
    return False


def render_camera_detections(scenario: Scenario, cam: CameraSensor, seed: int,
                             stream: int) -> dict[int, list[PixelDetection]]:
    """Per-frame pixel detections for one camera.

    Boxes are synthesized from the target's class height through the
    pinhole relation, so a noise-free rendering round-trips exactly
    through the geometry front-end.
    """
    w, h = cam.image_size
    model = cam.model
    frames: dict[int, list[PixelDetection]] = {}
    for f in range(scenario.n_frames):
        rng = _rng(seed, stream, f)
        dets: list[PixelDetection] = []
        for target in scenario.targets:
            if not target.alive(f):
                continue
            foot = np.array([*target.states[f, :2], 0.0])
            px, depth = _camera_point(model, foot)
            if not np.isfinite(px).all():
                continue
            h_px = model.f_y * target.height / depth
            u, v = px
            noise = rng.normal(0.0, 1.0, size=3) * cam.pixel_noise
            conf = float(rng.uniform(*cam.confidence))
            fvec = target.feature + cam.feature_noise * rng.normal(size=target.feature.shape)
            fvec = fvec / np.linalg.norm(fvec)
            detect = rng.random() < cam.p_detect
            if not (0 <= u < w and 0 <= v < h and v - h_px >= 0):
                continue
            if _occluded(scenario, cam, target, f) or not detect:
                continue
            u_n, v_n = u + noise[0], v + noise[1]
            h_n = max(h_px + noise[2], 4.0)
            width = 0.4 * h_n
            hint = None
            if cam.depth_hints:
                hint = DepthHint(depth=depth + float(rng.normal(0.0, 0.3)), confident=True)
            dets.append(PixelDetection(
                bbox=(u_n - width / 2.0, v_n - h_n, u_n + width / 2.0, v_n),
                confidence=conf, obj_class=target.obj_class,
                camera_id=cam.sensor_id, feature=fvec, depth_hint=hint))
        n_clutter = rng.poisson(cam.clutter_rate) if cam.clutter_rate > 0 else 0
        for _ in range(n_clutter):
            u = float(rng.uniform(0.0, w))
            v2 = float(rng.uniform(0.62 * h, h))
            box_h = float(rng.uniform(40.0, 260.0))
            width = 0.4 * box_h
            dets.append(PixelDetection(
                bbox=(u - width / 2.0, v2 - box_h, u + width / 2.0, v2),
                confidence=float(rng.uniform(*cam.clutter_confidence)),
                obj_class="pedestrian", camera_id=cam.sensor_id,
                feature=_unit_feature(rng, len(scenario.targets[0].feature))
                if scenario.targets else None))
        frames[f] = dets
    return frames


def render_radar_detections(scenario: Scenario, radar: RadarSensor, seed: int,
                            stream: int) -> dict[int, list[RadarPoint]]:
    """Per-frame radar returns for one radar: 1-5 points per visible target."""
    pose = radar.pose
    sigma_theta = math.radians(radar.sigma_theta_deg)
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    rot_t = np.array([[c, -s], [s, c]]).T
    frames: dict[int, list[RadarPoint]] = {}
    xmin, xmax, ymin, ymax = scenario.arena
    for f in range(scenario.n_frames):
        rng = _rng(seed, stream, f)
        points: list[RadarPoint] = []
        for target in scenario.targets:
            if not target.alive(f):
                continue
            if rng.random() >= radar.p_detect:
                continue
            pos = target.states[f, :2]
            vel = target.states[f, 2:]
            rel = pos - pose.origin
            dist = float(np.linalg.norm(rel))
            if dist < 1e-6:
                continue
            doppler = float(vel @ rel) / dist
            lo, hi = radar.points_per_target
            n_pts = int(rng.integers(lo, hi + 1))
            for _ in range(n_pts):
                jitter = pos + rng.normal(0.0, 0.15, size=2)
                local = rot_t @ (jitter - pose.origin)
                r = float(np.linalg.norm(local)) + float(rng.normal(0.0, radar.sigma_r))
                theta = math.atan2(local[0], local[1]) + float(rng.normal(0.0, sigma_theta))
                points.append(RadarPoint(
                    range_m=max(r, 0.1), azimuth=theta,
                    doppler=doppler + float(rng.normal(0.0, radar.doppler_noise)),
                    rcs=float(rng.normal(10.0, 3.0)),
                    yaw=pose.yaw, origin=pose.origin))
        n_clutter = rng.poisson(radar.clutter_rate) if radar.clutter_rate > 0 else 0
        for _ in range(n_clutter):
            pos = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])
            local = rot_t @ (pos - pose.origin)
            r = float(np.linalg.norm(local))
            if r < 0.5:
                continue
            doppler = (float(rng.uniform(-0.45, 0.45)) if rng.random() < 0.5
                       else float(rng.uniform(-8.0, 8.0)))
            points.append(RadarPoint(
                range_m=r, azimuth=math.atan2(local[0], local[1]),
                doppler=doppler, rcs=float(rng.normal(5.0, 3.0)),
                yaw=pose.yaw, origin=pose.origin))
        frames[f] = points
    return frames
