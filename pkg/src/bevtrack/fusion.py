"""Collapse of a cross-sensor cluster into one fused BEV estimate.

Only the independent covariance parts are precision-weighted; the shared
common-mode (calibration / ego-pose) term, when it is consistent across
members, is added back once so it cannot be averaged away by adding more
sensors of the same rig.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .geometry import BevMeasurement

FEATURE_EPS = 1e-8
_POSE_TOL = 1e-9


@dataclass
class FusedCluster:
    """A multi-sensor cluster reduced to one estimate.

    track_id / soft_ids are filled later by the tracker front-end:
    track_id None means the identity assignment chose "new".
    """

    z: np.ndarray                  # fused BEV position
    p_fused: np.ndarray            # total fused covariance
    r_pose: np.ndarray             # common-mode part of p_fused (zeros if none)
    beta_max: float
    obj_class: str
    member_count: int
    pass_label: str = "high"       # "high" (pass 1) or "low" (pass 2)
    feature: np.ndarray | None = None
    track_id: int | None = None
    soft_ids: dict[int, float] = field(default_factory=dict)
    birth_candidate: bool = False

    @property
    def p_indep(self) -> np.ndarray:
        return self.p_fused - self.r_pose


def information_fuse(zs: np.ndarray, covs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Information-form combination of independent Gaussian estimates."""
    infos = np.array([np.linalg.inv(c) for c in covs])
    p = np.linalg.inv(infos.sum(axis=0))
    z = p @ sum(info @ z for info, z in zip(infos, zs))
    return z, 0.5 * (p + p.T)


def _shared_pose(members: list["BevMeasurement"]) -> np.ndarray | None:
    first = members[0].r_pose
    for m in members[1:]:
        if np.linalg.norm(m.r_pose - first) > _POSE_TOL:
            return None
    return first


def pool_features(members: list["BevMeasurement"]) -> np.ndarray | None:
    """Confidence-weighted pooling of unit-normalized appearance features."""
    acc = None
    for m in members:
        if m.feature is None:
            continue
        unit = m.feature / np.linalg.norm(m.feature)
        acc = m.confidence * unit if acc is None else acc + m.confidence * unit
    if acc is None:
        return None
    return acc / (np.linalg.norm(acc) + FEATURE_EPS)


def _vote_class(members: list["BevMeasurement"]) -> str:
    votes: dict[str, float] = {}
    for m in members:
        votes[m.obj_class] = votes.get(m.obj_class, 0.0) + m.confidence
    top = max(votes.values())
    tied = [c for c, v in votes.items() if v == top]
    if len(tied) == 1:
        return tied[0]
    best = max((m for m in members if m.obj_class in tied), key=lambda m: m.confidence)
    return best.obj_class


def fuse_cluster(members: list["BevMeasurement"], pass_label: str = "high") -> FusedCluster:
    """Fuse cluster members by precision weighting.

    If every member carries the same common-mode covariance, only the
    independent parts are combined and the common-mode term is added back
    once; otherwise the totals are fused as if independent and the
    common-mode part of the result is zero.
    """
    if not members:
        raise ValueError("cannot fuse an empty cluster")
    shared = _shared_pose(members)
    if shared is not None:
        zs = np.array([m.z for m in members])
        covs = np.array([m.r_indep for m in members])
        r_pose = shared
    else:
        zs = np.array([m.z for m in members])
        covs = np.array([m.r_total for m in members])
        r_pose = np.zeros((2, 2))
    z, p_indep = information_fuse(zs, covs)
    return FusedCluster(
        z=z, p_fused=p_indep + r_pose, r_pose=r_pose,
        beta_max=max(m.confidence for m in members),
        obj_class=_vote_class(members),
        member_count=len(members),
        pass_label=pass_label,
        feature=pool_features(members))
