"""Configuration for the whole tracking pipeline.

Every tunable lives in a single flat ``TrackerConfig`` so sweeps can
override any field by name. JSON config files group the same values into
stage sections ("camera", "clustering", "tracking", ...); unknown sections
or keys are hard errors so typos never silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Invalid configuration file, key, or value."""


# Per-class overridable parameters (the rest are global).
_CLASS_PARAMS = {"p_S", "p_D", "sigma_v", "Q_scale", "H_ref", "pi_stay"}


@dataclass
class TrackerConfig:
    # --- camera depth front-end ---
    tau_yolo: float = 0.1            # min detector confidence to keep a box
    alpha_fp: float = 0.035          # footpoint depth relative uncertainty
    alpha_bbox: float = 0.05         # bbox-height depth relative uncertainty
    eta_fp: float = 3.0              # footpoint precision trust factor
    sigma2_min_depth: float = 1e-4   # floor on depth variance [m^2]
    gamma_inflate: float = 1.75      # variance inflation on depth-hint disagreement
    hint_disagree_m: float = 3.0     # disagreement distance that triggers inflation
    h_ref: float = 1.7               # reference object height [m]

    # --- radar front-end ---
    sigma_r: float = 0.10            # range std [m]
    sigma_theta_deg: float = 1.8     # azimuth std [deg]; radians internally
    eps_dbscan: float = 2.5          # DBSCAN neighborhood radius [m]
    n_min: int = 2                   # DBSCAN min samples (self-inclusive)
    v_min: float = 0.5               # moving-object Doppler cutoff [m/s]
    radar_class: str = "vehicle"     # class label for radar clusters

    # --- BEV projection ---
    sigma_pose: float = 0.17         # common-mode (calibration/ego-pose) std [m]
    sigma2_min: float = 0.16         # min eigenvalue of total BEV covariance [m^2]

    # --- cross-view clustering ---
    tau_p: float = 0.01              # chi^2 survival-probability edge gate
    tau_euc: float = 0.5             # hard Euclidean edge cutoff [m]
    tau_high: float = 0.5            # pass-1 confidence threshold
    tau_low: float = 0.2             # pass-2 confidence threshold
    allow_single_sensor: bool = True  # relax 2-sensor support when a frame has 1 sensor

    # --- tracking ---
    p_s: float = 0.99                # survival probability
    p_d: float = 0.90                # detection probability
    lambda_assoc: float = 2.5        # identity-prior boost in association cost
    mu_sem: float = 2.0              # appearance-similarity boost
    lambda_reid: float = 3.0         # appearance boost for lost-track re-identification
    w_boost: float = 0.15            # weight boost for matched components
    sigma_spatial: float = 1.0       # spatial bandwidth of the identity kernel [m]
    tau_geo: float = 5.0             # softmax temperature of the identity score
    tau_new: float = 12.0            # cost of spawning a new identity
    sigma_v: float = 1.0             # birth velocity prior std [m/s]
    tau_birth: float = 0.65          # min cluster confidence for birth
    q_scale: float = 0.9             # process-noise intensity
    tau_gate: float = 9.21           # chi^2_2 association gate (99%)
    tau_gate_tight: float = 4.61     # tighter gate for tentative/lost updates (90%)
    lambda_turn: float = 1.5         # speed-adaptive turn penalty gain

    # --- lifecycle ---
    n_init: int = 2                  # hits to confirm a tentative track
    k_max: int = 2                   # max lost age before deletion
    j_max: int = 100                 # max mixture components retained
    tau_confirmed: int = 0           # consecutive misses before Confirmed -> Lost
    tau_tent: int = 1                # consecutive tentative misses before deletion
    tau_prune: float = 0.05          # min component weight
    tau_merge: float = 2.5           # squared-Mahalanobis merge threshold

    # --- motion model ---
    pi_stay: tuple[float, float, float] = (0.75, 0.94, 0.10)
    dt: float = 0.5                  # frame period [s]
    stationary_damping: float = 0.5  # velocity damping of the stationary mode
    maneuver_q_factor: float = 10.0  # process-noise multiplier of the maneuver mode

    # --- track post-processing ---
    d_merge: float = 6.0             # tube merging max endpoint distance [m]
    g_merge: int = 5                 # tube merging max frame gap

    # per-class overrides, e.g. {"car": {"sigma_v": 8.0}}
    classes: dict[str, dict[str, Any]] = field(default_factory=dict)

    # -- class-aware accessors --------------------------------------------

    def _cls(self, obj_class: str, key: str, default: Any) -> Any:
        over = self.classes.get(obj_class)
        if over and key in over:
            return over[key]
        return default

    def p_s_for(self, obj_class: str) -> float:
        return float(self._cls(obj_class, "p_S", self.p_s))

    def p_d_for(self, obj_class: str) -> float:
        return float(self._cls(obj_class, "p_D", self.p_d))

    def sigma_v_for(self, obj_class: str) -> float:
        return float(self._cls(obj_class, "sigma_v", self.sigma_v))

    def q_scale_for(self, obj_class: str) -> float:
        return float(self._cls(obj_class, "Q_scale", self.q_scale))

    def h_ref_for(self, obj_class: str) -> float:
        return float(self._cls(obj_class, "H_ref", self.h_ref))

    def pi_stay_for(self, obj_class: str) -> tuple[float, float, float]:
        val = self._cls(obj_class, "pi_stay", self.pi_stay)
        return (float(val[0]), float(val[1]), float(val[2]))

    @property
    def sigma_theta(self) -> float:
        """Azimuth std in radians (config stores degrees)."""
        return math.radians(self.sigma_theta_deg)

    def validate(self) -> "TrackerConfig":
        for name in ("p_s", "p_d", "tau_birth"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ConfigError(f"{name} must be in (0, 1], got {v}")
        if len(self.pi_stay) != 3:
            raise ConfigError("pi_stay must have 3 entries")
        for name in ("tau_euc", "tau_gate", "tau_new", "sigma2_min", "tau_prune",
                     "tau_merge", "dt", "sigma_spatial", "tau_geo"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if not all(0.0 < p < 1.0 for p in self.pi_stay):
            raise ConfigError("pi_stay entries must be in (0, 1)")
        return self

    def replace(self, **kwargs: Any) -> "TrackerConfig":
        return dataclasses.replace(self, **kwargs)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["pi_stay"] = list(self.pi_stay)
        return d


@dataclass
class EvalConfig:
    threshold: float = 1.0     # positive-assignment distance gate [m]
    gospa_p: float = 2.0
    gospa_c: float = 1.0
    gospa_alpha: float = 2.0
    nees_level: float = 0.95

    def validate(self) -> "EvalConfig":
        if self.threshold <= 0:
            raise ConfigError("evaluation threshold must be > 0")
        if not 0.0 < self.gospa_alpha <= 2.0:
            raise ConfigError("gospa_alpha must be in (0, 2]")
        if self.gospa_p < 1.0:
            raise ConfigError("gospa_p must be >= 1")
        return self


# JSON section layout. Keys follow the symbol spellings used in the
# config files; values are the TrackerConfig attribute names.
_SECTIONS: dict[str, dict[str, str]] = {
    "camera": {
        "tau_yolo": "tau_yolo", "alpha_fp": "alpha_fp", "alpha_bbox": "alpha_bbox",
        "eta_fp": "eta_fp", "sigma2_min_depth": "sigma2_min_depth",
        "gamma_inflate": "gamma_inflate", "hint_disagree_m": "hint_disagree_m",
        "H_ref": "h_ref",
    },
    "radar": {
        "sigma_r": "sigma_r", "sigma_theta_deg": "sigma_theta_deg",
        "eps_dbscan": "eps_dbscan", "n_min": "n_min", "v_min": "v_min",
        "radar_class": "radar_class",
    },
    "projection": {"sigma_pose": "sigma_pose", "sigma2_min": "sigma2_min"},
    "clustering": {
        "tau_P": "tau_p", "tau_euc": "tau_euc", "tau_high": "tau_high",
        "tau_low": "tau_low", "allow_single_sensor": "allow_single_sensor",
    },
    "tracking": {
        "p_S": "p_s", "p_D": "p_d", "lambda_assoc": "lambda_assoc",
        "mu_sem": "mu_sem", "lambda_ReID": "lambda_reid", "w_boost": "w_boost",
        "sigma_spatial": "sigma_spatial", "tau_geo": "tau_geo", "tau_new": "tau_new",
        "sigma_v": "sigma_v", "tau_birth": "tau_birth", "Q_scale": "q_scale",
        "tau_gate": "tau_gate", "tau_gate_tight": "tau_gate_tight",
        "lambda_turn": "lambda_turn",
    },
    "lifecycle": {
        "N_init": "n_init", "K_max": "k_max", "J_max": "j_max",
        "tau_confirmed": "tau_confirmed", "tau_tent": "tau_tent",
        "tau_prune": "tau_prune", "tau_merge": "tau_merge",
    },
    "motion": {
        "pi_stay": "pi_stay", "dt": "dt",
        "stationary_damping": "stationary_damping",
        "maneuver_q_factor": "maneuver_q_factor",
    },
    "post": {"d_merge": "d_merge", "g_merge": "g_merge"},
}

_EVAL_KEYS = {"threshold", "gospa_p", "gospa_c", "gospa_alpha", "nees_level"}

PRESETS: dict[str, dict[str, Any]] = {
    "wildtrack": {},
    "multiviewx": {
        "tau_yolo": 0.63, "sigma_pose": 0.22, "sigma2_min": 0.21,
        "tau_high": 0.63, "tau_low": 0.63, "p_d": 0.95,
        "tau_confirmed": 1, "tau_tent": 0,
    },
    "radarscenes": {
        "sigma_pose": 0.32, "sigma2_min": 0.21, "tau_p": 0.001,
        "tau_gate": 13.82, "mu_sem": 0.0, "lambda_reid": 0.0,
        "sigma_v": 8.0, "tau_birth": 0.40, "q_scale": 15.0,
        "k_max": 5, "tau_confirmed": 3, "tau_tent": 2,
        "pi_stay": (0.70, 0.95, 0.15), "dt": 0.2,
    },
}


def preset(name: str) -> TrackerConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; valid: {sorted(PRESETS)}")
    return TrackerConfig(**PRESETS[name]).validate()


def _apply_section(overrides: dict[str, Any], section: str, body: Any) -> None:
    if not isinstance(body, dict):
        raise ConfigError(f"section {section!r} must be an object")
    keymap = _SECTIONS[section]
    for key, value in body.items():
        if key not in keymap:
            raise ConfigError(
                f"unknown key {key!r} in section {section!r}; valid: {sorted(keymap)}")
        if key == "pi_stay":
            value = tuple(float(x) for x in value)
        overrides[keymap[key]] = value


def config_from_dict(doc: dict[str, Any]) -> tuple[TrackerConfig, EvalConfig]:
    """Parse one config document into tracker and evaluation configs."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    overrides: dict[str, Any] = {}
    base = {}
    eval_kwargs: dict[str, Any] = {}
    for section, body in doc.items():
        if section == "preset":
            if body not in PRESETS:
                raise ConfigError(f"unknown preset {body!r}; valid: {sorted(PRESETS)}")
            base = dict(PRESETS[body])
        elif section == "classes":
            if not isinstance(body, dict):
                raise ConfigError("'classes' must map class name -> overrides")
            for cls_name, cls_body in body.items():
                bad = set(cls_body) - _CLASS_PARAMS
                if bad:
                    raise ConfigError(
                        f"unknown per-class key(s) {sorted(bad)} for {cls_name!r}; "
                        f"valid: {sorted(_CLASS_PARAMS)}")
            overrides["classes"] = body
        elif section == "evaluation":
            for key, value in body.items():
                if key not in _EVAL_KEYS:
                    raise ConfigError(
                        f"unknown key {key!r} in section 'evaluation'; valid: {sorted(_EVAL_KEYS)}")
                eval_kwargs[key] = value
        elif section in _SECTIONS:
            _apply_section(overrides, section, body)
        else:
            valid = sorted(list(_SECTIONS) + ["classes", "evaluation", "preset"])
            raise ConfigError(f"unknown section {section!r}; valid: {valid}")
    base.update(overrides)
    try:
        cfg = TrackerConfig(**base).validate()
    except TypeError as exc:  # wrong value shapes
        raise ConfigError(str(exc)) from exc
    return cfg, EvalConfig(**eval_kwargs).validate()


def load_config(path: str | Path) -> tuple[TrackerConfig, EvalConfig]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: invalid JSON: {exc}") from exc
    return config_from_dict(doc)


def _attr_names() -> dict[str, str]:
    """All settable names: python attribute names plus JSON spellings."""
    names = {}
    for keymap in _SECTIONS.values():
        for json_key, attr in keymap.items():
            names[json_key] = attr
            names[attr] = attr
    return names


def set_param(cfg: TrackerConfig, name: str, value: Any) -> TrackerConfig:
    """Return a copy of cfg with one parameter replaced, by either spelling."""
    names = _attr_names()
    if name not in names:
        raise ConfigError(
            f"unknown parameter {name!r}; valid: {sorted(set(names))}")
    attr = names[name]
    if attr == "pi_stay":
        value = tuple(float(x) for x in value)
    elif isinstance(getattr(cfg, attr), bool):
        value = bool(value)
    elif isinstance(getattr(cfg, attr), int) and not isinstance(value, bool):
        value = int(value)
    elif isinstance(getattr(cfg, attr), float):
        value = float(value)
    return cfg.replace(**{attr: value}).validate()
