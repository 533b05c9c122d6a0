"""Same-frame grouping of BEV measurements across sensors.

Measurements from distinct sensors are linked when their Mahalanobis
distance under summed covariances is chi-square consistent; connected
components of that graph, split into sensor-unique groups, become the
clusters handed to fusion. Clustering runs in two confidence passes:
low-confidence leftovers may later update existing tracks but never
start new ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import TrackerConfig
from .geometry import BevMeasurement


@dataclass
class AssociationGraph:
    nodes: list[int]
    edges: list[tuple[int, int, float]]   # (i, j, P_same), i < j


@dataclass
class RawCluster:
    members: tuple[int, ...]       # measurement indices
    pass_label: str = "high"


def pairwise_consistency(a: BevMeasurement, b: BevMeasurement) -> tuple[float, float]:
    """Mahalanobis distance under summed covariances and its chi^2_2 survival.

    For 2 dof the survival function is exp(-d^2 / 2) in closed form.
    """
    diff = a.z - b.z
    s = a.r_total + b.r_total
    d2 = float(diff @ np.linalg.solve(s, diff))
    return d2, math.exp(-0.5 * d2)


def build_graph(measurements: list[BevMeasurement], tau_p: float,
                tau_euc: float) -> AssociationGraph:
    """Edges between cross-sensor pairs that pass both gates.

    The hard Euclidean cutoff caps the chi^2 gate so that very uncertain
    pairs cannot chain distant measurements together.
    """
    n = len(measurements)
    edges: list[tuple[int, int, float]] = []
    if n >= 2:
        zs = np.array([m.z for m in measurements])
        d = np.linalg.norm(zs[:, None, :] - zs[None, :, :], axis=2)
        for i in range(n):
            for j in range(i + 1, n):
                if measurements[i].sensor_id == measurements[j].sensor_id:
                    continue
                if d[i, j] > tau_euc:
                    continue
                _, p_same = pairwise_consistency(measurements[i], measurements[j])
                if p_same > tau_p:
                    edges.append((i, j, p_same))
    return AssociationGraph(nodes=list(range(n)), edges=edges)


def connected_components(graph: AssociationGraph,
                         keep_singletons: bool = False) -> list[RawCluster]:
    """Undirected connected components; singletons are dropped by default."""
    parent = {v: v for v in graph.nodes}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j, _ in graph.edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    groups: dict[int, list[int]] = {}
    for v in graph.nodes:
        groups.setdefault(find(v), []).append(v)
    out = []
    for root in sorted(groups):
        members = tuple(sorted(groups[root]))
        if len(members) >= 2 or keep_singletons:
            out.append(RawCluster(members=members))
    return out


def split_sensor_unique(cluster: RawCluster, measurements: list[BevMeasurement],
                        min_support: int = 2) -> list[RawCluster]:
    """Split a component into groups with at most one member per sensor.

    Members are assigned greedily in descending confidence (ties broken by
    sensor id, then index) to the first group that does not yet contain
    their sensor. Groups supported by fewer than min_support sensors are
    discarded.
    """
    order = sorted(cluster.members,
                   key=lambda i: (-measurements[i].confidence,
                                  measurements[i].sensor_id, i))
    groups: list[dict[str, int]] = []
    for idx in order:
        sensor = measurements[idx].sensor_id
        for g in groups:
            if sensor not in g:
                g[sensor] = idx
                break
        else:
            groups.append({sensor: idx})
    return [RawCluster(members=tuple(sorted(g.values())), pass_label=cluster.pass_label)
            for g in groups if len(g) >= min_support]


def cluster_pass(measurements: list[BevMeasurement], indices: list[int],
                 cfg: TrackerConfig, pass_label: str,
                 min_support: int) -> list[RawCluster]:
    subset = [measurements[i] for i in indices]
    graph = build_graph(subset, cfg.tau_p, cfg.tau_euc)
    comps = connected_components(graph, keep_singletons=min_support <= 1)
    out: list[RawCluster] = []
    for comp in comps:
        comp = RawCluster(members=comp.members, pass_label=pass_label)
        for part in split_sensor_unique(comp, subset, min_support=min_support):
            out.append(RawCluster(
                members=tuple(indices[i] for i in part.members),
                pass_label=pass_label))
    return out


def cascaded_cluster(measurements: list[BevMeasurement],
                     cfg: TrackerConfig) -> list[RawCluster]:
    """Two-pass clustering: confident measurements first, leftovers second.

    Pass-2 clusters are labeled "low"; downstream they may only update
    existing tracks, never spawn births. The two-sensor support rule is
    relaxed to one when the frame contains a single sensor, since no
    cross-sensor edge can exist then.
    """
    sensors = {m.sensor_id for m in measurements}
    min_support = 1 if (len(sensors) <= 1 and cfg.allow_single_sensor) else 2
    high = [i for i, m in enumerate(measurements) if m.confidence >= cfg.tau_high]
    low = [i for i, m in enumerate(measurements)
           if cfg.tau_low <= m.confidence < cfg.tau_high]
    clusters = cluster_pass(measurements, high, cfg, "high", min_support)
    clusters += cluster_pass(measurements, low, cfg, "low", min_support)
    return clusters
