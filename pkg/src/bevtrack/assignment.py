"""Exact rectangular min-cost linear assignment.

The solver is a Jonker-Volgenant style shortest-augmenting-path method
with dual potentials. Infinite entries mark infeasible pairs and are
never assigned; a row whose every entry is infinite (or that no
augmenting path can reach) is simply left unassigned, so infeasibility
never raises. Ties between equal-cost solutions resolve toward lower
(row, col) indices: rows are processed in order and column scans keep
the first minimum.

This one kernel backs identity assignment, track-level association, and
the evaluation metrics; tests check it against brute-force permutation
enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

INF = float("inf")


@dataclass
class CostMatrix:
    """Dense extended-real cost matrix with optional row/col labels."""

    costs: np.ndarray
    row_labels: list = field(default_factory=list)
    col_labels: list = field(default_factory=list)

    def __post_init__(self):
        self.costs = np.asarray(self.costs, dtype=float)
        if self.costs.ndim != 2:
            raise ValueError("cost matrix must be 2-D")


def solve_assignment(costs: np.ndarray | CostMatrix) -> list[tuple[int, int]]:
    """Minimum-total-cost one-to-one assignment.

    Returns (row, col) pairs sorted by row. Rows with no finite entry, or
    in excess of what the finite structure can support, stay unassigned.
    """
    if isinstance(costs, CostMatrix):
        costs = costs.costs
    a = np.asarray(costs, dtype=float)
    if a.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    n, m = a.shape
    if n == 0 or m == 0:
        return []
    if n > m:
        pairs = solve_assignment(a.T)
        return sorted((r, c) for c, r in pairs)

    # Replace infeasible entries by a dominating finite cost so the search
    # maximizes the number of feasible matches before minimizing their sum
    # (sequential augmentation alone could strand a cheap later row while
    # keeping a costly earlier one). Big-M pairs are dropped at the end.
    finite = np.isfinite(a)
    infeasible = None
    if not finite.all():
        span = float(np.abs(a[finite]).max()) if finite.any() else 0.0
        big = 1.0 + 2.0 * n * span
        infeasible = ~finite
        a = np.where(infeasible, big, a)

    # 1-indexed with a virtual column 0 that carries the row being inserted.
    # p[j] = row matched to column j (0 = free); u/v are dual potentials.
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)
    way = [0] * (m + 1)

    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (m + 1)
        used = [False] * (m + 1)
        reachable = True
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = -1
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = a[i0 - 1][j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            if j1 < 0 or not math.isfinite(delta):
                reachable = False
                break
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        if not reachable:
            p[0] = 0
            continue
        while j0 != 0:  # flip the alternating path back to the root
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    pairs = [(p[j] - 1, j - 1) for j in range(1, m + 1) if p[j] != 0]
    if infeasible is not None:
        pairs = [(r, c) for r, c in pairs if not infeasible[r, c]]
    return sorted(pairs)


def total_cost(costs: np.ndarray, pairs: list[tuple[int, int]]) -> float:
    a = np.asarray(costs, dtype=float)
    return float(sum(a[r, c] for r, c in pairs))


def miss_cost(p_d: float) -> float:
    """Cost of leaving a track unmatched: -log(1 - p_D), p_D clamped <= 0.999."""
    return -math.log(1.0 - min(float(p_d), 0.999))


def augment_with_miss_columns(track_costs: np.ndarray,
                              miss_costs: np.ndarray) -> np.ndarray:
    """Append one dedicated miss column per row.

    Row t may select only its own miss column; every other row sees +inf
    there, so the solver can always produce a full row cover.
    """
    c = np.asarray(track_costs, dtype=float)
    m = np.asarray(miss_costs, dtype=float)
    n_rows = c.shape[0]
    if m.shape != (n_rows,):
        raise ValueError("need one miss cost per row")
    block = np.full((n_rows, n_rows), INF)
    np.fill_diagonal(block, m)
    return np.hstack([c, block])
