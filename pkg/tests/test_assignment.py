"""Assignment kernel vs brute-force enumeration."""

import itertools

import numpy as np
import pytest

from bevtrack.assignment import (INF, augment_with_miss_columns, miss_cost,
                                 solve_assignment, total_cost)


def brute_force(a: np.ndarray) -> tuple[int, float]:
    """Max feasible matches first, then min total cost, by enumeration."""
    n, m = a.shape
    best = None
    for k in range(min(n, m), -1, -1):
        for rows in itertools.combinations(range(n), k):
            for cols in itertools.permutations(range(m), k):
                if all(np.isfinite(a[r, c]) for r, c in zip(rows, cols)):
                    cost = sum(a[r, c] for r, c in zip(rows, cols))
                    if best is None or cost < best:
                        best = cost
        if best is not None:
            return k, float(best)
    return 0, 0.0


def test_diagonal_optimum():
    assert solve_assignment(np.array([[0.0, 1.0], [1.0, 0.0]])) == [(0, 0), (1, 1)]


def test_antidiagonal_optimum():
    a = np.array([[4.0, 1.0], [2.0, 3.0]])
    pairs = solve_assignment(a)
    assert pairs == [(0, 1), (1, 0)]
    assert total_cost(a, pairs) == 3.0


def test_all_infinite_row_unassigned():
    a = np.array([[INF, INF], [1.0, 2.0]])
    assert solve_assignment(a) == [(1, 0)]


def test_matches_brute_force_on_random_matrices():
    rng = np.random.default_rng(7)
    for _ in range(300):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(1, 7))
        a = rng.uniform(0.0, 10.0, size=(n, m))
        pairs = solve_assignment(a)
        k, cost = brute_force(a)
        assert len(pairs) == k
        assert total_cost(a, pairs) == pytest.approx(cost, abs=1e-9)


def test_matches_brute_force_with_infeasible_entries():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, 6))
        a = rng.uniform(0.0, 10.0, size=(n, m))
        a[rng.random((n, m)) < 0.35] = INF
        pairs = solve_assignment(a)
        k, cost = brute_force(a)
        assert len(pairs) == k
        assert total_cost(a, pairs) == pytest.approx(cost, abs=1e-9)


def test_solution_is_a_matching():
    rng = np.random.default_rng(3)
    a = rng.uniform(0, 10, size=(6, 9))
    pairs = solve_assignment(a)
    rows = [r for r, _ in pairs]
    cols = [c for _, c in pairs]
    assert len(set(rows)) == len(rows)
    assert len(set(cols)) == len(cols)


def test_row_constant_shift_keeps_argmin():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(2, 6))
        m = int(rng.integers(n, 7))
        a = rng.integers(0, 10, size=(n, m)).astype(float)
        base = solve_assignment(a)
        shifted = a.copy()
        row = int(rng.integers(0, n))
        shifted[row] += float(rng.integers(1, 8))
        assert solve_assignment(shifted) == base


def test_miss_cost_value():
    assert miss_cost(0.9) == pytest.approx(2.302585, abs=1e-5)


def test_miss_cost_clamps_certain_detection():
    assert np.isfinite(miss_cost(1.0))


def test_single_track_no_gated_measurement_takes_miss_column():
    c_track = np.array([[INF]])
    full = augment_with_miss_columns(c_track, np.array([miss_cost(0.9)]))
    assert solve_assignment(full) == [(0, 1)]


def test_two_tracks_one_measurement_brute_force():
    # rows: tracks, col 0: the measurement, cols 1-2: per-track miss.
    c_track = np.array([[1.0], [1.5]])
    miss = np.array([miss_cost(0.9), miss_cost(0.9)])
    full = augment_with_miss_columns(c_track, miss)
    pairs = solve_assignment(full)
    total = total_cost(full, pairs)
    best = min(
        c_track[0, 0] + miss[1],   # track 0 matched, track 1 miss
        c_track[1, 0] + miss[0],   # track 1 matched, track 0 miss
        miss[0] + miss[1],         # both miss
    )
    assert total == pytest.approx(best, abs=1e-12)
    assert pairs == [(0, 0), (1, 2)]


def test_miss_block_off_diagonal_infeasible():
    full = augment_with_miss_columns(np.zeros((3, 2)), np.ones(3))
    block = full[:, 2:]
    assert np.isfinite(np.diag(block)).all()
    off = block[~np.eye(3, dtype=bool)]
    assert np.isinf(off).all()
