"""Evaluation suite: CLEAR MOT, IDF1, GOSPA, NEES calibration, tube merging.

All metrics operate on BEV positions in meters with a configurable
positive-assignment distance gate (default 1.0 m). Frame tables map
frame -> {id -> position}; helpers convert the JSONL row formats used on
disk into that shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy.special import gammaincinv

from .assignment import INF, solve_assignment
from .config import EvalConfig


class EvaluationError(ValueError):
    """Evaluation is undefined for these inputs (e.g. no ground truth)."""


FrameTable = dict[int, dict[Any, np.ndarray]]


def rows_to_frames(rows, id_key: str = "id") -> FrameTable:
    table: FrameTable = {}
    for row in rows:
        table.setdefault(int(row["frame"]), {})[row[id_key]] = np.array(
            [float(row["x"]), float(row["y"])])
    return table


def rows_to_cov_frames(rows, id_key: str = "id") -> dict[int, dict[Any, np.ndarray]]:
    table: dict[int, dict[Any, np.ndarray]] = {}
    for row in rows:
        if "cov" not in row:
            continue
        table.setdefault(int(row["frame"]), {})[row[id_key]] = np.array(
            row["cov"], dtype=float).reshape(2, 2)
    return table


def chi2_quantile(p: float, dof: float) -> float:
    """Chi-square quantile through the regularized incomplete gamma inverse."""
    return 2.0 * float(gammaincinv(dof / 2.0, p))


# --- CLEAR MOT ---------------------------------------------------------------


@dataclass
class ClearMotResult:
    mota: float
    motp: float
    mean_dist: float | None
    fp: int
    fn: int
    idsw: int
    matches: int
    gt_total: int


def clear_mot(gt_frames: FrameTable, trk_frames: FrameTable,
              cfg: EvalConfig) -> ClearMotResult:
    """CLEAR protocol: persist previous correspondences while they stay
    within the gate, then assign the remainder by minimum distance.

    MOTP is reported as 100 * (1 - mean match distance / gate) so that,
    like MOTA, higher is better; the raw mean distance is kept alongside.
    """
    thr = cfg.threshold
    frames = sorted(set(gt_frames) | set(trk_frames))
    last: dict[Any, Any] = {}
    fp = fn = idsw = matches = gt_total = 0
    dist_sum = 0.0
    for f in frames:
        gts = gt_frames.get(f, {})
        trks = trk_frames.get(f, {})
        gt_total += len(gts)
        pairs: dict[Any, Any] = {}
        used = set()
        for gid in sorted(gts, key=str):
            tid = last.get(gid)
            if tid is None or tid in used or tid not in trks:
                continue
            d = float(np.linalg.norm(gts[gid] - trks[tid]))
            if d <= thr:
                pairs[gid] = tid
                used.add(tid)
                dist_sum += d
        rem_g = [g for g in sorted(gts, key=str) if g not in pairs]
        rem_t = [t for t in sorted(trks, key=str) if t not in used]
        if rem_g and rem_t:
            costs = np.full((len(rem_g), len(rem_t)), INF)
            for a, gid in enumerate(rem_g):
                for b, tid in enumerate(rem_t):
                    d = float(np.linalg.norm(gts[gid] - trks[tid]))
                    if d <= thr:
                        costs[a, b] = d
            for a, b in solve_assignment(costs):
                gid, tid = rem_g[a], rem_t[b]
                pairs[gid] = tid
                dist_sum += costs[a, b]
        for gid, tid in pairs.items():
            if gid in last and last[gid] != tid:
                idsw += 1
            last[gid] = tid
        matches += len(pairs)
        fn += len(gts) - len(pairs)
        fp += len(trks) - len(pairs)
    if gt_total == 0:
        raise EvaluationError("MOTA is undefined without ground-truth detections")
    mean_dist = dist_sum / matches if matches else None
    motp = 100.0 * (1.0 - mean_dist / thr) if matches else 0.0
    mota = 100.0 * (1.0 - (fn + fp + idsw) / gt_total)
    return ClearMotResult(mota, motp, mean_dist, fp, fn, idsw, matches, gt_total)


# --- IDF1 ---------------------------------------------------------------------


def idf1(gt_frames: FrameTable, trk_frames: FrameTable, cfg: EvalConfig) -> float:
    """Identity-aware F1 from a single global trajectory matching.

    Trajectory-pair overlaps (frames where both exist within the gate)
    are maximized by one assignment; everything not covered counts as
    identity FP/FN.
    """
    gt_ids = sorted({g for f in gt_frames.values() for g in f}, key=str)
    tr_ids = sorted({t for f in trk_frames.values() for t in f}, key=str)
    total_gt = sum(len(f) for f in gt_frames.values())
    total_tr = sum(len(f) for f in trk_frames.values())
    if total_gt == 0 and total_tr == 0:
        return 100.0
    if not gt_ids or not tr_ids:
        return 0.0
    overlap = np.zeros((len(gt_ids), len(tr_ids)))
    g_index = {g: i for i, g in enumerate(gt_ids)}
    t_index = {t: i for i, t in enumerate(tr_ids)}
    for f in set(gt_frames) & set(trk_frames):
        for gid, gpos in gt_frames[f].items():
            for tid, tpos in trk_frames[f].items():
                if float(np.linalg.norm(gpos - tpos)) <= cfg.threshold:
                    overlap[g_index[gid], t_index[tid]] += 1
    idtp = sum(overlap[a, b] for a, b in solve_assignment(-overlap))
    idfn = total_gt - idtp
    idfp = total_tr - idtp
    return 100.0 * 2.0 * idtp / (2.0 * idtp + idfp + idfn)


# --- GOSPA ---------------------------------------------------------------------


def gospa(gt_points: np.ndarray, est_points: np.ndarray, cfg: EvalConfig) -> float:
    """GOSPA between two point sets, exact via the assignment solver.

    Pairwise costs are clamped at (2/alpha) c^p, which makes assigning a
    far pair exactly as expensive as declaring both unmatched, so a full
    assignment of min(|X|, |Y|) pairs realizes the optimum over partial
    assignments for any alpha in (0, 2].
    """
    x = np.asarray(gt_points, dtype=float).reshape(-1, 2)
    y = np.asarray(est_points, dtype=float).reshape(-1, 2)
    p, c, alpha = cfg.gospa_p, cfg.gospa_c, cfg.gospa_alpha
    miss_term = c ** p / alpha
    if len(x) == 0 and len(y) == 0:
        return 0.0
    total = miss_term * abs(len(x) - len(y))
    if len(x) and len(y):
        d = np.linalg.norm(x[:, None, :] - y[None, :, :], axis=2) ** p
        d = np.minimum(d, 2.0 * miss_term)
        pairs = solve_assignment(d)
        total += sum(d[a, b] for a, b in pairs)
    return float(total ** (1.0 / p))


def gospa_series(gt_frames: FrameTable, trk_frames: FrameTable,
                 cfg: EvalConfig) -> dict[int, float]:
    out = {}
    for f in sorted(set(gt_frames) | set(trk_frames)):
        g = np.array(list(gt_frames.get(f, {}).values())).reshape(-1, 2)
        t = np.array(list(trk_frames.get(f, {}).values())).reshape(-1, 2)
        out[f] = gospa(g, t, cfg)
    return out


# --- NEES calibration ------------------------------------------------------------


NOMINAL_COVERAGE_1S = 1.0 - math.exp(-0.5)   # P(chi^2_2 <= 1) = 39.3%
NOMINAL_COVERAGE_2S = 1.0 - math.exp(-2.0)   # P(chi^2_2 <= 4) = 86.5%


@dataclass
class NeesReport:
    verdict: str                 # CALIBRATED | OVERCONFIDENT | CONSERVATIVE
    mean_nees: float
    ci: tuple[float, float]
    n: int
    coverage_1s: float
    coverage_2s: float

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict, "mean_nees": self.mean_nees,
            "ci": list(self.ci), "n": self.n,
            "coverage_1sigma": self.coverage_1s,
            "coverage_2sigma": self.coverage_2s,
            "nominal_1sigma": NOMINAL_COVERAGE_1S,
            "nominal_2sigma": NOMINAL_COVERAGE_2S,
        }


def nees_calibration(errors: np.ndarray, covs: np.ndarray,
                     level: float = 0.95) -> NeesReport:
    """Mean-NEES consistency test against the chi-square interval.

    For a calibrated 2-D estimator, N * mean(NEES) ~ chi^2 with 2N dof;
    a mean above the interval means the covariances are too small
    (overconfident), below means too large (conservative).
    """
    errors = np.asarray(errors, dtype=float).reshape(-1, 2)
    n = len(errors)
    if n == 0:
        raise EvaluationError("NEES calibration needs at least one matched pair")
    covs = np.asarray(covs, dtype=float).reshape(n, 2, 2)
    nees = np.array([e @ np.linalg.solve(p, e) for e, p in zip(errors, covs)])
    mean = float(nees.mean())
    tail = (1.0 - level) / 2.0
    lo = chi2_quantile(tail, 2 * n) / n
    hi = chi2_quantile(1.0 - tail, 2 * n) / n
    if mean > hi:
        verdict = "OVERCONFIDENT"
    elif mean < lo:
        verdict = "CONSERVATIVE"
    else:
        verdict = "CALIBRATED"
    return NeesReport(
        verdict=verdict, mean_nees=mean, ci=(lo, hi), n=n,
        coverage_1s=float(np.mean(nees <= 1.0)),
        coverage_2s=float(np.mean(nees <= 4.0)))


def match_errors(gt_frames: FrameTable, trk_frames: FrameTable,
                 trk_covs: Mapping[int, Mapping[Any, np.ndarray]],
                 threshold: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame gated assignment of tracks to truth; returns (errors, covs)."""
    errors, covs = [], []
    for f in sorted(set(gt_frames) & set(trk_frames)):
        gts = gt_frames[f]
        trks = trk_frames[f]
        g_ids = sorted(gts, key=str)
        t_ids = sorted(trks, key=str)
        costs = np.full((len(g_ids), len(t_ids)), INF)
        for a, gid in enumerate(g_ids):
            for b, tid in enumerate(t_ids):
                d = float(np.linalg.norm(gts[gid] - trks[tid]))
                if d <= threshold:
                    costs[a, b] = d
        for a, b in solve_assignment(costs):
            tid = t_ids[b]
            cov = trk_covs.get(f, {}).get(tid)
            if cov is None:
                continue
            errors.append(gts[g_ids[a]] - trks[tid])
            covs.append(cov)
    return np.array(errors).reshape(-1, 2), np.array(covs).reshape(-1, 2, 2)


# --- tube merging -------------------------------------------------------------


def merge_track_tubes(rows: list[dict], d_merge: float, g_merge: int) -> list[dict]:
    """Stitch track fragments separated by small temporal and spatial gaps.

    Fragments are visited earliest-end-first; a fragment absorbs the
    eligible fragment that starts soonest after it ends (ties: nearer
    endpoint, then smaller id), and the merged fragment keeps looking, so
    chains collapse to one identity.
    """
    frags: dict[Any, dict] = {}
    for row in rows:
        f, tid = int(row["frame"]), row["id"]
        pos = np.array([float(row["x"]), float(row["y"])])
        frag = frags.get(tid)
        if frag is None:
            frags[tid] = {"id": tid, "start": f, "end": f,
                          "start_pos": pos, "end_pos": pos}
        else:
            if f < frag["start"]:
                frag["start"], frag["start_pos"] = f, pos
            if f > frag["end"]:
                frag["end"], frag["end_pos"] = f, pos
    alias: dict[Any, Any] = {}
    open_frags = sorted(frags.values(), key=lambda fr: (fr["end"], str(fr["id"])))
    while open_frags:
        frag = min(open_frags, key=lambda fr: (fr["end"], str(fr["id"])))
        best = None
        best_key = None
        for other in open_frags:
            if other is frag:
                continue
            gap = other["start"] - frag["end"]
            if not 1 <= gap <= g_merge:
                continue
            d = float(np.linalg.norm(other["start_pos"] - frag["end_pos"]))
            if d > d_merge:
                continue
            key = (other["start"], d, str(other["id"]))
            if best_key is None or key < best_key:
                best_key, best = key, other
        if best is None:
            open_frags.remove(frag)
            continue
        alias[best["id"]] = frag["id"]
        frag["end"], frag["end_pos"] = best["end"], best["end_pos"]
        open_frags.remove(best)

    def resolve(tid):
        while tid in alias:
            tid = alias[tid]
        return tid

    out = []
    for row in rows:
        new = dict(row)
        new["id"] = resolve(row["id"])
        out.append(new)
    return out


# --- report ---------------------------------------------------------------------


@dataclass
class EvalReport:
    mota: float
    motp: float
    idf1: float
    mean_gospa: float
    gospa_per_frame: dict[int, float] = field(repr=False, default_factory=dict)
    fp: int = 0
    fn: int = 0
    idsw: int = 0
    matches: int = 0
    gt_total: int = 0
    mean_dist: float | None = None
    nees: NeesReport | None = None

    def to_dict(self) -> dict:
        d = {
            "MOTA": self.mota, "MOTP": self.motp, "IDF1": self.idf1,
            "mean_GOSPA": self.mean_gospa,
            "GOSPA_per_frame": {str(k): v for k, v in self.gospa_per_frame.items()},
            "FP": self.fp, "FN": self.fn, "IDSW": self.idsw,
            "matches": self.matches, "gt_total": self.gt_total,
            "mean_match_distance": self.mean_dist,
        }
        d["NEES"] = self.nees.to_dict() if self.nees else None
        return d

    def table(self) -> str:
        lines = [
            f"{'MOTA':>12}: {self.mota:8.2f}",
            f"{'MOTP':>12}: {self.motp:8.2f}",
            f"{'IDF1':>12}: {self.idf1:8.2f}",
            f"{'mean GOSPA':>12}: {self.mean_gospa:8.4f}",
            f"{'FP/FN/IDSW':>12}: {self.fp}/{self.fn}/{self.idsw}",
            f"{'matches':>12}: {self.matches} over {self.gt_total} GT",
        ]
        if self.nees:
            lines.append(
                f"{'NEES':>12}: {self.nees.verdict} "
                f"(mean {self.nees.mean_nees:.3f}, CI [{self.nees.ci[0]:.3f}, "
                f"{self.nees.ci[1]:.3f}], 1s {100 * self.nees.coverage_1s:.1f}%, "
                f"2s {100 * self.nees.coverage_2s:.1f}%)")
        return "\n".join(lines)


def evaluate(gt_frames: FrameTable, trk_frames: FrameTable, cfg: EvalConfig,
             trk_covs: Mapping[int, Mapping[Any, np.ndarray]] | None = None,
             ) -> EvalReport:
    """All metrics in one report; NEES only when covariances are supplied."""
    clear = clear_mot(gt_frames, trk_frames, cfg)
    series = gospa_series(gt_frames, trk_frames, cfg)
    mean_gospa = float(np.mean(list(series.values()))) if series else 0.0
    nees = None
    if trk_covs:
        errors, covs = match_errors(gt_frames, trk_frames, trk_covs, cfg.threshold)
        if len(errors):
            nees = nees_calibration(errors, covs, cfg.nees_level)
    return EvalReport(
        mota=clear.mota, motp=clear.motp,
        idf1=idf1(gt_frames, trk_frames, cfg),
        mean_gospa=mean_gospa, gospa_per_frame=series,
        fp=clear.fp, fn=clear.fn, idsw=clear.idsw,
        matches=clear.matches, gt_total=clear.gt_total,
        mean_dist=clear.mean_dist, nees=nees)
