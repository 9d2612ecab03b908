"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from mapshare.grid_world import CellPos, WorldMap
from mapshare.planner import PlannerConfig, cell_cost


@pytest.fixture
def flat_world():
    """6x6 all-free world."""
    return WorldMap(6, 6, np.zeros(36))


def brute_force_min_path_cost(
    costs: np.ndarray, start: CellPos, goal: CellPos, width: int, height: int
) -> float:
    """Exhaustive minimum vertex-cost over all simple 4-connected paths.

    Depth-first enumeration; exponential, keep grids at 4x4 or smaller.
    """
    start_i = start.row * width + start.col
    goal_i = goal.row * width + goal.col
    best = [np.inf]
    visited = [False] * (width * height)

    def moves(i: int):
        r, c = divmod(i, width)
        if r > 0:
            yield i - width
        if r < height - 1:
            yield i + width
        if c > 0:
            yield i - 1
        if c < width - 1:
            yield i + 1

    def walk(i: int, acc: float):
        acc += costs[i]
        if acc >= best[0]:
            return
        if i == goal_i:
            best[0] = acc
            return
        visited[i] = True
        for j in moves(i):
            if not visited[j]:
                walk(j, acc)
        visited[i] = False

    walk(start_i, 0.0)
    return best[0]


def brute_force_feasible_exists(
    occupancy: np.ndarray, start: CellPos, goal: CellPos, width: int, height: int,
    epsilon: float,
) -> bool:
    """Whether a path through occupancy <= epsilon cells exists (BFS)."""
    start_i = start.row * width + start.col
    goal_i = goal.row * width + goal.col
    if occupancy[start_i] > epsilon or occupancy[goal_i] > epsilon:
        return False
    seen = {start_i}
    frontier = [start_i]
    while frontier:
        nxt = []
        for i in frontier:
            r, c = divmod(i, width)
            for j in (
                [i - width] * (r > 0)
                + [i + width] * (r < height - 1)
                + [i - 1] * (c > 0)
                + [i + 1] * (c < width - 1)
            ):
                if j not in seen and occupancy[j] <= epsilon:
                    seen.add(j)
                    nxt.append(j)
        frontier = nxt
    return goal_i in seen


def grid_search_projection(
    rows: list[dict[int, float]],
    rhs: list[float],
    n: int,
    mu: np.ndarray,
    step: float = 0.01,
) -> tuple[np.ndarray, float]:
    """Brute-force minimizer of ||x - mu||^2 over {Ax=b, 0<=x<=1}.

    Test-local Gaussian elimination picks pivot variables, the free ones
    are enumerated on a grid, pivots are back-substituted, infeasible
    grid points are masked out. Independent of the package solver.
    """
    m = len(rows)
    A = np.zeros((m, n))
    b = np.array(rhs, dtype=float)
    for i, row in enumerate(rows):
        for c, w in row.items():
            A[i, c] = w
    aug = np.hstack([A, b[:, None]])
    pivots: list[int] = []
    r = 0
    for c in range(n):
        if r >= m:
            break
        piv = r + int(np.argmax(np.abs(aug[r:, c])))
        if abs(aug[piv, c]) < 1e-12:
            continue
        aug[[r, piv]] = aug[[piv, r]]
        aug[r] /= aug[r, c]
        for q in range(m):
            if q != r:
                aug[q] -= aug[q, c] * aug[r]
        pivots.append(c)
        r += 1
    rank = r
    assert not np.any(np.abs(aug[rank:, -1]) > 1e-9), "inconsistent test system"
    free = [c for c in range(n) if c not in pivots]

    ticks = np.round(np.arange(0.0, 1.0 + step / 2, step), 10)
    grids = np.meshgrid(*[ticks] * len(free), indexing="ij") if free else []
    n_pts = ticks.size ** len(free) if free else 1
    pts = np.empty((n_pts, n))
    if free:
        for j, c in enumerate(free):
            pts[:, c] = grids[j].ravel()
    for i, c in enumerate(pivots):
        acc = np.full(n_pts, aug[i, -1])
        for fc in free:
            if abs(aug[i, fc]) > 0:
                acc -= aug[i, fc] * pts[:, fc]
        pts[:, c] = acc
    feas = np.all((pts >= -1e-9) & (pts <= 1.0 + 1e-9), axis=1)
    assert feas.any(), "no feasible grid point in test instance"
    obj = ((pts - mu) ** 2).sum(axis=1)
    obj[~feas] = np.inf
    best = int(np.argmin(obj))
    return pts[best], float(obj[best])


def random_qp_instance(rng: np.random.Generator, n_free: int = 2):
    """Random feasible instance with entries from {1, 1/2, 1/3, 1/4}.

    Returns (n, rows, rhs): k rows over n variables, n - rank = n_free
    after elimination is not guaranteed exactly, but supports are chosen
    disjoint enough that rank == k almost surely.
    """
    k = int(rng.integers(1, 4))
    n = k + n_free + int(rng.integers(0, 2))
    n = min(n, 6)
    entries = np.array([1.0, 0.5, 1.0 / 3.0, 0.25])
    x0 = rng.integers(0, 101, size=n) / 100.0
    rows = []
    rhs = []
    for _ in range(k):
        support = rng.choice(n, size=int(rng.integers(1, min(3, n) + 1)), replace=False)
        row = {int(c): float(entries[rng.integers(len(entries))]) for c in support}
        rows.append(row)
        rhs.append(float(sum(w * x0[c] for c, w in row.items())))
    return n, rows, rhs


def store_from_rows(rows, rhs, n):
    from mapshare.constraints import ConstraintStore

    store = ConstraintStore(n)
    for row, b in zip(rows, rhs):
        store.add_row(row, b)
    return store.reduce_independent()


def manual_cell_cost(occ: float, cfg: PlannerConfig) -> float:
    return cell_cost(occ, cfg)
