"""Identity-informed GM-PHD tracking filter.

A Gaussian-mixture PHD recursion augmented with persistent identity
labels, three HMM motion modes, appearance features, and a track
lifecycle. The filter runs in a closed loop with the fusion stage: each
frame it first exports one representative component per visible track,
uses that pool to give every fused cluster a hard identity and a soft
spatial identity distribution, and only then predicts, associates at the
track level, and updates.

Per frame:
  (i)   export the track pool (tentative + confirmed representatives)
  (ii)  hard/soft identity assignment for the new fused clusters
  (iii) HMM-mode prediction of all components + identity-aware births
  (iv)  confirmed-track assignment and Kalman update, then a second pass
        for tentative/lost tracks on the unclaimed measurements
  (v)   prune / merge / mode-collapse, lifecycle transitions, output
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .assignment import INF, augment_with_miss_columns, miss_cost, solve_assignment
from .config import TrackerConfig
from .fusion import FusedCluster


class TrackState(Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    LOST = "lost"


@dataclass
class GaussianComponent:
    """One mixture hypothesis: weighted Gaussian with identity and mode."""

    weight: float
    mean: np.ndarray               # [x, y, vx, vy]
    cov: np.ndarray                # 4x4
    track_id: int
    mode: int                      # 1 stationary, 2 constant velocity, 3 maneuver
    obj_class: str = "object"
    feature: np.ndarray | None = None


@dataclass
class TrackRecord:
    """Lifecycle bookkeeping for one persistent identity."""

    track_id: int
    obj_class: str
    state: TrackState = TrackState.TENTATIVE
    hits: int = 0
    misses: int = 0                # consecutive
    lost_age: int = 0
    age: int = 0
    feature: np.ndarray | None = None


@dataclass
class PoolTrack:
    """Representative component of a visible track, as exported to the front-end."""

    track_id: int
    mean: np.ndarray
    cov: np.ndarray
    mode: int
    feature: np.ndarray | None


@dataclass
class TrackOutput:
    frame: int
    track_id: int
    x: float
    y: float
    vx: float
    vy: float
    cov: np.ndarray                # 2x2 position covariance
    mode: int
    state: str

    def to_row(self) -> dict:
        return {
            "frame": self.frame, "id": self.track_id,
            "x": self.x, "y": self.y, "vx": self.vx, "vy": self.vy,
            "cov": [float(v) for v in self.cov.ravel()],
            "mode": self.mode, "state": self.state,
        }


H = np.array([[1.0, 0.0, 0.0, 0.0],
              [0.0, 1.0, 0.0, 0.0]])


class MotionModel:
    """Per-mode linear dynamics with a class-specific mode chain.

    Modes 1-3: velocity-damped stationary, exact constant velocity, and
    constant velocity with inflated process noise. Process noise is the
    discrete white-noise-acceleration model scaled by Q_scale (times
    maneuver_q_factor in mode 3). Off-diagonal chain mass is the
    remainder of pi_stay split equally over the other two modes.
    """

    def __init__(self, cfg: TrackerConfig):
        self.cfg = cfg
        dt = cfg.dt
        f_cv = np.eye(4)
        f_cv[0, 2] = dt
        f_cv[1, 3] = dt
        f_stat = np.eye(4)
        f_stat[2, 2] = f_stat[3, 3] = cfg.stationary_damping
        self.f = {1: f_stat, 2: f_cv, 3: f_cv.copy()}
        self._g = np.array([[dt * dt / 2, 0.0], [0.0, dt * dt / 2],
                            [dt, 0.0], [0.0, dt]])
        self._q: dict[tuple[int, str], np.ndarray] = {}
        self._pi: dict[str, np.ndarray] = {}

    def q(self, mode: int, obj_class: str) -> np.ndarray:
        key = (mode, obj_class)
        if key not in self._q:
            scale = self.cfg.q_scale_for(obj_class)
            if mode == 3:
                scale *= self.cfg.maneuver_q_factor
            self._q[key] = scale * (self._g @ self._g.T)
        return self._q[key]

    def pi(self, obj_class: str) -> np.ndarray:
        if obj_class not in self._pi:
            stay = self.cfg.pi_stay_for(obj_class)
            mat = np.empty((3, 3))
            for i in range(3):
                off = (1.0 - stay[i]) / 2.0
                mat[i] = off
                mat[i, i] = stay[i]
            self._pi[obj_class] = mat
        return self._pi[obj_class]


def kalman_update(mean: np.ndarray, cov: np.ndarray, z: np.ndarray,
                  r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Joseph-form Kalman update with position-only measurements."""
    s = H @ cov @ H.T + r
    gain = cov @ H.T @ np.linalg.inv(s)
    new_mean = mean + gain @ (z - H @ mean)
    i_kh = np.eye(4) - gain @ H
    new_cov = i_kh @ cov @ i_kh.T + gain @ r @ gain.T
    return new_mean, 0.5 * (new_cov + new_cov.T)


def soft_identity_scores(d2_by_track: dict[int, float], hard_id: int | None,
                         cfg: TrackerConfig) -> dict[int, float]:
    """Soft spatial identity distribution over chi^2-gated tracks.

    A Gaussian proximity score g is pushed through a temperature softmax;
    the hard-assigned identity is guaranteed nonzero unnormalized mass so
    the distribution stays valid.
    """
    gated = {t: d2 for t, d2 in d2_by_track.items() if d2 < cfg.tau_gate}
    if not gated:
        return {}
    scores = {}
    for t, d2 in gated.items():
        g = math.exp(-d2 / (2.0 * cfg.sigma_spatial ** 2))
        scores[t] = math.exp(g / cfg.tau_geo)
    if hard_id is not None and hard_id in scores:
        scores[hard_id] = max(scores[hard_id], 1.0)
    total = sum(scores.values())
    return {t: s / total for t, s in scores.items()}


def _cosine(a: np.ndarray | None, b: np.ndarray | None) -> float:
    if a is None or b is None:
        return 0.0
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        return 0.0
    return float(a @ b / (na * nb))


class GmPhdTracker:
    """Stateful per-session filter; strictly sequential over frames."""

    def __init__(self, cfg: TrackerConfig):
        self.cfg = cfg
        self.motion = MotionModel(cfg)
        self.components: list[GaussianComponent] = []
        self.records: dict[int, TrackRecord] = {}
        self.frame = -1
        self._next_id = 1

    # -- (i) pool export ----------------------------------------------------

    def export_track_pool(self) -> list[PoolTrack]:
        """One representative (max weight, ties to lower mode) per visible track.

        Lost tracks are not visible: they re-enter only through the
        re-identification pass.
        """
        by_id: dict[int, list[GaussianComponent]] = {}
        for comp in self.components:
            by_id.setdefault(comp.track_id, []).append(comp)
        pool = []
        for tid in sorted(self.records):
            rec = self.records[tid]
            if rec.state is TrackState.LOST or tid not in by_id:
                continue
            best = min(by_id[tid], key=lambda c: (-c.weight, c.mode))
            pool.append(PoolTrack(tid, best.mean, best.cov, best.mode, best.feature))
        return pool

    # -- (ii) identity assignment -------------------------------------------

    def assign_identities(self, clusters: list[FusedCluster],
                          pool: list[PoolTrack]) -> None:
        """Fill each cluster's hard identity and soft identity distribution.

        The hard identity comes from gated Mahalanobis costs solved as an
        assignment problem with a per-cluster "new identity" column at
        cost tau_new; clusters assigned "new" become birth candidates.
        """
        n_c, n_t = len(clusters), len(pool)
        if n_c == 0:
            return
        d2 = np.full((n_c, n_t), INF)
        for t, track in enumerate(pool):
            z_t = H @ track.mean
            s_t = H @ track.cov @ H.T
            for i, cluster in enumerate(clusters):
                diff = cluster.z - z_t
                d2[i, t] = float(diff @ np.linalg.solve(s_t + cluster.p_fused, diff))
        costs = np.full((n_c, n_t + n_c), INF)
        gate = d2 < self.cfg.tau_gate
        costs[:, :n_t][gate] = d2[gate]
        for i in range(n_c):
            costs[i, n_t + i] = self.cfg.tau_new
        hard: dict[int, int | None] = {i: None for i in range(n_c)}
        for i, col in solve_assignment(costs):
            hard[i] = pool[col].track_id if col < n_t else None
        for i, cluster in enumerate(clusters):
            cluster.track_id = hard[i]
            gated = {pool[t].track_id: d2[i, t] for t in range(n_t)}
            cluster.soft_ids = soft_identity_scores(gated, hard[i], self.cfg)

    # -- (iii) prediction and birth -------------------------------------------

    def predict(self) -> None:
        """Propagate every component through all three destination modes."""
        cfg = self.cfg
        out: list[GaussianComponent] = []
        for comp in self.components:
            p_s = cfg.p_s_for(comp.obj_class)
            row = self.motion.pi(comp.obj_class)[comp.mode - 1]
            for s_new in (1, 2, 3):
                f = self.motion.f[s_new]
                out.append(GaussianComponent(
                    weight=p_s * row[s_new - 1] * comp.weight,
                    mean=f @ comp.mean,
                    cov=f @ comp.cov @ f.T + self.motion.q(s_new, comp.obj_class),
                    track_id=comp.track_id, mode=s_new,
                    obj_class=comp.obj_class, feature=comp.feature))
        self.components = out

    def spawn_births(self, clusters: list[FusedCluster]) -> list[int]:
        """Birth components for confident, unexplained pass-1 clusters.

        One component per motion mode, weighted by the stationary-mode
        prior row of the mode chain; velocity starts at zero with the
        class birth prior on its variance.
        """
        cfg = self.cfg
        born = []
        for cluster in clusters:
            if (cluster.pass_label != "high" or cluster.track_id is not None
                    or cluster.beta_max < cfg.tau_birth):
                continue
            tid = self._next_id
            self._next_id += 1
            cluster.track_id = tid
            cluster.birth_candidate = True
            sigma_v = cfg.sigma_v_for(cluster.obj_class)
            cov = np.zeros((4, 4))
            cov[:2, :2] = cluster.p_fused
            cov[2:, 2:] = sigma_v ** 2 * np.eye(2)
            mean = np.array([cluster.z[0], cluster.z[1], 0.0, 0.0])
            prior = self.motion.pi(cluster.obj_class)[0]
            for s in (1, 2, 3):
                self.components.append(GaussianComponent(
                    weight=cluster.beta_max * prior[s - 1],
                    mean=mean.copy(), cov=cov.copy(), track_id=tid, mode=s,
                    obj_class=cluster.obj_class, feature=cluster.feature))
            self.records[tid] = TrackRecord(
                track_id=tid, obj_class=cluster.obj_class, hits=1,
                feature=cluster.feature)
            born.append(tid)
        return born

    # -- (iv) association and update ------------------------------------------

    def nll_cost(self, comp: GaussianComponent,
                 cluster: FusedCluster) -> tuple[float, float]:
        """Gaussian negative log-likelihood (constant term dropped) and d^2."""
        s = H @ comp.cov @ H.T + cluster.p_fused
        diff = cluster.z - H @ comp.mean
        d2 = float(diff @ np.linalg.solve(s, diff))
        _, logdet = np.linalg.slogdet(s)
        base = 0.5 * (d2 + logdet) - math.log(self.cfg.p_d_for(comp.obj_class))
        return base, d2

    def association_cost(self, comp: GaussianComponent,
                         cluster: FusedCluster) -> tuple[float, float]:
        """Full association cost: NLL with identity, appearance, and turn terms.

        Infinite outside the chi^2 gate. The turn penalty grows with
        predicted speed and the angle between the predicted velocity and
        the displacement the measurement implies, so stationary components
        are never penalized for direction changes.
        """
        cfg = self.cfg
        base, d2 = self.nll_cost(comp, cluster)
        if d2 >= cfg.tau_gate:
            return INF, d2
        cost = base
        cost -= cfg.lambda_assoc * cluster.soft_ids.get(comp.track_id, 0.0)
        cost -= cfg.mu_sem * _cosine(comp.feature, cluster.feature)
        vel = comp.mean[2:]
        speed = float(np.linalg.norm(vel))
        # Measurement direction: displacement the measurement implies from
        # the pre-prediction position. Using the raw innovation instead
        # makes the angle noise-dominated once the track has converged and
        # lets the penalty latch onto the wrong motion mode.
        direction = cluster.z - (comp.mean[:2] - cfg.dt * vel)
        dir_norm = float(np.linalg.norm(direction))
        if speed > 1e-9 and dir_norm > 1e-9:
            cos_dt = float(vel @ direction) / (speed * dir_norm)
            cost += cfg.lambda_turn * speed * (1.0 - cos_dt)
        return cost, d2

    def _by_id(self) -> dict[int, list[GaussianComponent]]:
        by_id: dict[int, list[GaussianComponent]] = {}
        for comp in self.components:
            by_id.setdefault(comp.track_id, []).append(comp)
        return by_id

    def _apply_match(self, comps: list[GaussianComponent], winner_idx: int,
                     cluster: FusedCluster) -> None:
        cfg = self.cfg
        for k, comp in enumerate(comps):
            if k == winner_idx:
                comp.mean, comp.cov = kalman_update(
                    comp.mean, comp.cov, cluster.z, cluster.p_fused)
                comp.weight = min(comp.weight + cfg.w_boost, 1.0)
                if cluster.feature is not None:
                    comp.feature = cluster.feature
            else:
                comp.weight *= 1.0 - cfg.p_d_for(comp.obj_class)

    def _apply_miss(self, comps: list[GaussianComponent]) -> None:
        for comp in comps:
            comp.weight *= 1.0 - self.cfg.p_d_for(comp.obj_class)

    def _confirmed_stage(self, track_ids: list[int], cluster_idx: list[int],
                         clusters: list[FusedCluster],
                         by_id: dict[int, list[GaussianComponent]],
                         ) -> tuple[dict[int, tuple[int, int]], list[int]]:
        """One gated track-level assignment with dedicated miss columns.

        Returns {track_id: (cluster index, winning component index)} plus
        the tracks that took their miss columns; weights are not touched
        here so a later stage can still match the leftovers.
        """
        if not track_ids or not cluster_idx:
            return {}, list(track_ids)
        n_t, n_c = len(track_ids), len(cluster_idx)
        grouped = np.full((n_t, n_c), INF)
        winners = np.zeros((n_t, n_c), dtype=int)
        for a, tid in enumerate(track_ids):
            comps = by_id[tid]
            for b, ci in enumerate(cluster_idx):
                best, best_j = INF, 0
                for j, comp in enumerate(comps):
                    cost, _ = self.association_cost(comp, clusters[ci])
                    if cost < best:
                        best, best_j = cost, j
                grouped[a, b] = best
                winners[a, b] = best_j
        misses = np.array([miss_cost(self.cfg.p_d_for(self.records[tid].obj_class))
                           for tid in track_ids])
        pairs = solve_assignment(augment_with_miss_columns(grouped, misses))
        matched: dict[int, tuple[int, int]] = {}
        unmatched: list[int] = []
        assigned_rows = {r: c for r, c in pairs}
        for a, tid in enumerate(track_ids):
            col = assigned_rows.get(a)
            if col is not None and col < n_c:
                matched[tid] = (cluster_idx[col], winners[a, col])
            else:
                unmatched.append(tid)
        return matched, unmatched

    def update_confirmed(self, clusters: list[FusedCluster],
                         ) -> tuple[dict[int, str], set[int]]:
        """Track-level assignment over confirmed tracks.

        High-confidence clusters are offered first; tracks that chose a
        miss column get a second chance against low-confidence clusters,
        which exist only to sustain existing tracks. Kalman updates, weight
        boosts, and miss penalties apply once both stages are decided.
        """
        by_id = self._by_id()
        confirmed = [tid for tid in sorted(self.records)
                     if self.records[tid].state is TrackState.CONFIRMED
                     and tid in by_id]
        high = [i for i, c in enumerate(clusters) if c.pass_label == "high"]
        low = [i for i, c in enumerate(clusters) if c.pass_label != "high"]
        matched, unmatched = self._confirmed_stage(confirmed, high, clusters, by_id)
        matched2, _ = self._confirmed_stage(unmatched, low, clusters, by_id)
        matched.update(matched2)
        report = {}
        for tid in confirmed:
            if tid in matched:
                ci, winner = matched[tid]
                self._apply_match(by_id[tid], winner, clusters[ci])
                rec = self.records[tid]
                if clusters[ci].feature is not None:
                    rec.feature = clusters[ci].feature
                report[tid] = "hit"
            else:
                self._apply_miss(by_id[tid])
                report[tid] = "miss"
        claimed = {ci for ci, _ in matched.values()}
        return report, claimed

    def update_tentative_lost(self, clusters: list[FusedCluster],
                              claimed: set[int]) -> dict[int, str]:
        """Second pass: tentative and lost tracks against unclaimed clusters.

        Lost tracks are served first (re-identification has priority over
        fresh births competing for the same cluster) and rank candidates
        by a combined spatial-appearance score. Updates require the
        tighter chi^2 gate. Unmatched lost tracks keep their weight: they
        are coasting hypotheses held only for re-identification.
        """
        cfg = self.cfg
        by_id = self._by_id()
        lost = [tid for tid in sorted(self.records)
                if self.records[tid].state is TrackState.LOST and tid in by_id]
        tentative = [tid for tid in sorted(self.records)
                     if self.records[tid].state is TrackState.TENTATIVE and tid in by_id]
        report: dict[int, str] = {}

        for tid in lost + tentative:
            rec = self.records[tid]
            comps = by_id[tid]
            is_lost = rec.state is TrackState.LOST
            best_key = None
            best = None  # (cluster index, component index, d2)
            for ci, cluster in enumerate(clusters):
                if ci in claimed:
                    continue
                for j, comp in enumerate(comps):
                    base, d2 = self.nll_cost(comp, cluster)
                    if d2 >= cfg.tau_gate:
                        continue
                    if is_lost:
                        key = -(-d2 + cfg.lambda_reid * _cosine(rec.feature, cluster.feature))
                    else:
                        key = base
                    if best_key is None or key < best_key:
                        best_key = key
                        best = (ci, j, d2)
            if best is not None and best[2] < cfg.tau_gate_tight:
                ci, j, _ = best
                self._apply_match(comps, j, clusters[ci])
                if clusters[ci].feature is not None:
                    rec.feature = clusters[ci].feature
                claimed.add(ci)
                report[tid] = "hit"
            else:
                if not is_lost:
                    self._apply_miss(comps)
                report[tid] = "miss"
        return report

    # -- (v) management, lifecycle, output -------------------------------------

    def prune_merge_collapse(self) -> None:
        """Prune low weights, merge close same-identity pairs, keep one
        mode per identity, and cap the mixture size.

        The surviving representative of a live track is never pruned away
        by weight alone; track existence is the lifecycle's decision. If
        the component cap evicts a track's last component, its record goes
        with it.
        """
        cfg = self.cfg
        by_id = self._by_id()
        kept: list[GaussianComponent] = []
        for tid in sorted(by_id):
            comps = by_id[tid]
            rec = self.records.get(tid)
            exempt = rec is not None and rec.state is TrackState.LOST
            if not exempt:
                pruned = [c for c in comps if c.weight >= cfg.tau_prune]
                if not pruned and rec is not None:
                    pruned = [min(comps, key=lambda c: (-c.weight, c.mode))]
                comps = pruned
            if not comps:
                continue
            comps = self._merge_same_id(comps)
            kept.append(min(comps, key=lambda c: (-c.weight, c.mode)))
        if len(kept) > cfg.j_max:
            kept.sort(key=lambda c: (-c.weight, c.track_id))
            for comp in kept[cfg.j_max:]:
                self.records.pop(comp.track_id, None)
            kept = kept[:cfg.j_max]
        kept.sort(key=lambda c: c.track_id)
        self.components = kept

    def _merge_same_id(self, comps: list[GaussianComponent]) -> list[GaussianComponent]:
        """Moment-matched merging of nearby components of one identity."""
        cfg = self.cfg
        remaining = sorted(comps, key=lambda c: (-c.weight, c.mode))
        merged: list[GaussianComponent] = []
        while remaining:
            anchor = remaining.pop(0)
            group = [anchor]
            rest = []
            p_inv = np.linalg.inv(anchor.cov)
            for c in remaining:
                diff = c.mean - anchor.mean
                if float(diff @ p_inv @ diff) < cfg.tau_merge:
                    group.append(c)
                else:
                    rest.append(c)
            remaining = rest
            if len(group) == 1:
                merged.append(anchor)
                continue
            w = sum(c.weight for c in group)
            mean = sum(c.weight * c.mean for c in group) / w
            cov = np.zeros((4, 4))
            for c in group:
                diff = (c.mean - mean).reshape(-1, 1)
                cov += (c.weight / w) * (c.cov + diff @ diff.T)
            merged.append(GaussianComponent(
                weight=min(w, 1.0), mean=mean, cov=0.5 * (cov + cov.T),
                track_id=anchor.track_id, mode=anchor.mode,
                obj_class=anchor.obj_class, feature=anchor.feature))
        return merged

    def lifecycle_step(self, report: dict[int, str]) -> list[int]:
        """Hit/miss bookkeeping and state transitions; returns deleted ids."""
        cfg = self.cfg
        deleted = []
        for tid in sorted(self.records):
            rec = self.records[tid]
            rec.age += 1
            outcome = report.get(tid, "miss")
            if outcome == "hit":
                rec.hits += 1
                rec.misses = 0
                if rec.state is TrackState.TENTATIVE and rec.hits >= cfg.n_init:
                    rec.state = TrackState.CONFIRMED
                elif rec.state is TrackState.LOST:
                    rec.state = TrackState.CONFIRMED
                    rec.lost_age = 0
            else:
                rec.hits = max(0, rec.hits - 1)
                rec.misses += 1
                if rec.state is TrackState.TENTATIVE:
                    if rec.misses > cfg.tau_tent:
                        deleted.append(tid)
                elif rec.state is TrackState.CONFIRMED:
                    if rec.misses > cfg.tau_confirmed:
                        rec.state = TrackState.LOST
                        rec.lost_age = 0
                        rec.misses = 0
                else:
                    rec.lost_age += 1
                    if rec.lost_age > cfg.k_max:
                        deleted.append(tid)
        for tid in deleted:
            del self.records[tid]
        if deleted:
            gone = set(deleted)
            self.components = [c for c in self.components if c.track_id not in gone]
        return deleted

    def step(self, clusters: list[FusedCluster]) -> list[TrackOutput]:
        """Run one full frame and return the confirmed-track estimates."""
        self.frame += 1
        pool = self.export_track_pool()
        self.assign_identities(clusters, pool)
        self.predict()
        self.spawn_births(clusters)
        report, claimed = self.update_confirmed(clusters)
        report.update(self.update_tentative_lost(clusters, claimed))
        self.prune_merge_collapse()
        self.lifecycle_step(report)
        outputs = []
        by_id = self._by_id()
        for tid in sorted(self.records):
            rec = self.records[tid]
            if rec.state is not TrackState.CONFIRMED or tid not in by_id:
                continue
            comp = by_id[tid][0]
            outputs.append(TrackOutput(
                frame=self.frame, track_id=tid,
                x=float(comp.mean[0]), y=float(comp.mean[1]),
                vx=float(comp.mean[2]), vy=float(comp.mean[3]),
                cov=comp.cov[:2, :2].copy(), mode=comp.mode,
                state=rec.state.value))
        return outputs
