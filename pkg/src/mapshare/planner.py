"""Shortest-path planning on per-cell traversal costs.

Vertex-cost semantics: a path pays the cost of every cell it visits,
including both endpoints. Cells whose occupancy exceeds the feasibility
threshold get a large finite cost so a route always exists, but infeasible
cells are only used when no feasible route is available.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass

import numpy as np

from .grid_world import CellPos

__all__ = [
    "UP",
    "DOWN",
    "LEFT",
    "RIGHT",
    "DEFAULT_ACTIONS",
    "PlannerConfig",
    "PlannedPath",
    "NoPathError",
    "cell_cost",
    "cost_map",
    "shortest_path",
]

UP = (-1, 0)
DOWN = (1, 0)
LEFT = (0, -1)
RIGHT = (0, 1)
# fixed order; doubles as the deterministic tie-break order
DEFAULT_ACTIONS = (UP, DOWN, LEFT, RIGHT)


class NoPathError(RuntimeError):
    """Goal not reachable under the configured action set."""


@dataclass(frozen=True)
class PlannerConfig:
    """Cost-model parameters for the grid planner."""

    n_cells: int
    move_cost: float = 0.025
    epsilon: float = 0.501
    actions: tuple[tuple[int, int], ...] = DEFAULT_ACTIONS

    def __post_init__(self):
        if self.n_cells <= 0:
            raise ValueError("n_cells must be positive")
        if self.move_cost <= 0:
            raise ValueError("move_cost must be positive")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not self.actions:
            raise ValueError("action set must be nonempty")
        for dr, dc in self.actions:
            if abs(dr) + abs(dc) != 1:
                raise ValueError(f"action ({dr}, {dc}) is not a unit grid step")

    @property
    def infeasible_cost(self) -> float:
        return self.n_cells * (self.epsilon + self.move_cost)


def cell_cost(occupancy: float, cfg: PlannerConfig) -> float:
    """Traversal cost of one cell: occupancy + move penalty if feasible,
    else the large constant N*(epsilon + move penalty)."""
    if occupancy <= cfg.epsilon:
        return occupancy + cfg.move_cost
    return cfg.infeasible_cost


def cost_map(occupancy: np.ndarray, cfg: PlannerConfig) -> np.ndarray:
    """Vectorized cell_cost over a full occupancy vector."""
    occupancy = np.asarray(occupancy, dtype=float)
    return np.where(
        occupancy <= cfg.epsilon, occupancy + cfg.move_cost, cfg.infeasible_cost
    )


@dataclass(frozen=True)
class PlannedPath:
    """Action-connected vertex sequence from start to goal."""

    vertices: tuple[CellPos, ...]
    total_cost: float

    def __len__(self) -> int:
        return len(self.vertices)


def shortest_path(
    costs: np.ndarray,
    start: CellPos,
    goal: CellPos,
    cfg: PlannerConfig,
    width: int,
    height: int,
) -> PlannedPath:
    """Dijkstra over vertex costs with deterministic tie-breaking.

    Neighbors are relaxed in the fixed action order and heap ties resolve
    by insertion order, so equal-cost instances always yield the same
    path. The start vertex's cost is included in the total.
    """
    costs = np.asarray(costs, dtype=float)
    if costs.shape != (width * height,):
        raise ValueError(f"cost vector size {costs.size} != {width * height}")
    if np.any(costs < 0):
        raise ValueError("cell costs must be nonnegative")
    for pos, name in ((start, "start"), (goal, "goal")):
        if not (0 <= pos.row < height and 0 <= pos.col < width):
            raise ValueError(f"{name} {pos} outside {width}x{height} grid")

    n = width * height
    start_i = start.row * width + start.col
    goal_i = goal.row * width + goal.col

    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=int)
    settled = np.zeros(n, dtype=bool)
    counter = itertools.count()

    dist[start_i] = costs[start_i]
    heap: list[tuple[float, int, int]] = [(dist[start_i], next(counter), start_i)]
    while heap:
        d, _, u = heapq.heappop(heap)
        if settled[u]:
            continue
        settled[u] = True
        if u == goal_i:
            break
        ur, uc = divmod(u, width)
        for dr, dc in cfg.actions:
            vr, vc = ur + dr, uc + dc
            if not (0 <= vr < height and 0 <= vc < width):
                continue
            v = vr * width + vc
            nd = d + costs[v]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, next(counter), v))

    if not settled[goal_i]:
        raise NoPathError(f"no route from {start} to {goal} under the action set")

    chain = [goal_i]
    while chain[-1] != start_i:
        chain.append(int(pred[chain[-1]]))
    chain.reverse()
    vertices = tuple(CellPos(i // width, i % width) for i in chain)
    return PlannedPath(vertices=vertices, total_cost=float(dist[goal_i]))
