"""Seeded random desk-scale worlds and supporter routes for ensembles.

Layouts mix straight wall strokes (with gaps) and elliptical blobs so
that dead ends and pockets occur, then get rejection-sampled until the
requested start and goal are connected through feasible cells.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .grid_world import CellPos, WorldMap

__all__ = [
    "MapGenParams",
    "generate_world",
    "feasible_endpoints",
    "generate_scenario_world",
    "random_supporter_path",
]


@dataclass(frozen=True)
class MapGenParams:
    width: int = 24
    height: int = 24
    wall_count: int | None = None  # default scales with perimeter
    blob_count: int | None = None  # default scales with area
    blob_radius: tuple[float, float] = (1.5, 3.5)
    speckle: float = 0.15  # max occupancy of free-space noise
    obstacle_range: tuple[float, float] = (0.8, 1.0)
    epsilon: float = 0.501  # feasibility threshold used for connectivity


def generate_world(params: MapGenParams, rng: np.random.Generator) -> WorldMap:
    """One random layout; feasibility is NOT guaranteed here."""
    h, w = params.height, params.width
    grid = rng.uniform(0.0, params.speckle, size=(h, w))
    lo, hi = params.obstacle_range

    n_walls = params.wall_count
    if n_walls is None:
        n_walls = max(2, (w + h) // 10)
    for _ in range(n_walls):
        horizontal = bool(rng.integers(2))
        length = int(rng.integers(max(3, (w if horizontal else h) // 3),
                                  max(4, 2 * (w if horizontal else h) // 3) + 1))
        if horizontal:
            r = int(rng.integers(1, h - 1))
            c0 = int(rng.integers(0, max(1, w - length)))
            cells = [(r, c) for c in range(c0, min(c0 + length, w))]
        else:
            c = int(rng.integers(1, w - 1))
            r0 = int(rng.integers(0, max(1, h - length)))
            cells = [(r, c) for r in range(r0, min(r0 + length, h))]
        gap = int(rng.integers(0, len(cells)))  # leave one opening
        for i, (r, c) in enumerate(cells):
            if i == gap:
                continue
            grid[r, c] = rng.uniform(lo, hi)

    n_blobs = params.blob_count
    if n_blobs is None:
        n_blobs = max(2, (w * h) // 80)
    for _ in range(n_blobs):
        cr = rng.uniform(0, h - 1)
        cc = rng.uniform(0, w - 1)
        rr = rng.uniform(*params.blob_radius)
        rc = rng.uniform(*params.blob_radius)
        rows, cols = np.indices((h, w))
        mask = ((rows - cr) / rr) ** 2 + ((cols - cc) / rc) ** 2 <= 1.0
        grid[mask] = rng.uniform(lo, hi, size=int(mask.sum()))

    return WorldMap(width=w, height=h, occupancy=grid.ravel())


def _feasible_component(world: WorldMap, start: CellPos, epsilon: float) -> set[int]:
    """Cells reachable from start through occupancy <= epsilon, 4-connected."""
    if world.value(start) > epsilon:
        return set()
    w = world.width
    seen = {world.index(start)}
    queue = deque(seen)
    while queue:
        i = queue.popleft()
        r, c = divmod(i, w)
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < world.height and 0 <= nc < w:
                j = nr * w + nc
                if j not in seen and world.occupancy[j] <= epsilon:
                    seen.add(j)
                    queue.append(j)
    return seen


def feasible_endpoints(
    world: WorldMap,
    rng: np.random.Generator,
    epsilon: float,
    min_separation: int | None = None,
) -> tuple[CellPos, CellPos] | None:
    """Sample a start/goal pair connected through feasible cells."""
    if min_separation is None:
        min_separation = (world.width + world.height) // 2
    free = np.flatnonzero(world.occupancy <= epsilon)
    if free.size < 2:
        return None
    for _ in range(40):
        s = int(free[rng.integers(free.size)])
        start = world.pos_of(s)
        component = _feasible_component(world, start, epsilon)
        far = [
            i
            for i in component
            if abs(i // world.width - start.row) + abs(i % world.width - start.col)
            >= min_separation
        ]
        if far:
            goal = world.pos_of(int(far[rng.integers(len(far))]))
            return start, goal
    return None


def generate_scenario_world(
    params: MapGenParams,
    seed: int | np.random.SeedSequence,
    start: CellPos | None = None,
    goal: CellPos | None = None,
    max_tries: int = 60,
) -> tuple[WorldMap, CellPos, CellPos]:
    """Generate until start and goal sit in one feasible component.

    Fixed endpoints are honored (layouts are resampled around them);
    otherwise endpoints are drawn from the layout.
    """
    base = (
        seed
        if isinstance(seed, np.random.SeedSequence)
        else np.random.SeedSequence(seed)
    )
    for attempt in range(max_tries):
        # spawn() keeps the full key (entropy + spawn_key) in play
        rng = np.random.default_rng(base.spawn(1)[0])
        world = generate_world(params, rng)
        if start is not None and goal is not None:
            grid = world.grid().copy()
            # keep the requested endpoints traversable
            grid[start.row, start.col] = 0.0
            grid[goal.row, goal.col] = 0.0
            world = WorldMap(world.width, world.height, grid.ravel())
            component = _feasible_component(world, start, params.epsilon)
            if world.index(goal) in component:
                return world, start, goal
            continue
        pair = feasible_endpoints(world, rng, params.epsilon)
        if pair is not None:
            return world, pair[0], pair[1]
    raise RuntimeError(f"no feasible layout found in {max_tries} attempts")


def random_supporter_path(
    rng: np.random.Generator,
    width: int,
    height: int,
    length: int,
    near: CellPos,
    toward: CellPos,
) -> tuple[CellPos, ...]:
    """Predefined route sweeping the corridor between two anchor cells.

    Built from Manhattan legs through random waypoints inside the
    inflated bounding box of the anchors; the vehicle may overfly
    obstacles so no feasibility check applies.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    margin = max(2, (width + height) // 8)
    r_lo = max(0, min(near.row, toward.row) - margin)
    r_hi = min(height - 1, max(near.row, toward.row) + margin)
    c_lo = max(0, min(near.col, toward.col) - margin)
    c_hi = min(width - 1, max(near.col, toward.col) + margin)

    def waypoint() -> CellPos:
        return CellPos(int(rng.integers(r_lo, r_hi + 1)), int(rng.integers(c_lo, c_hi + 1)))

    start = CellPos(
        min(max(near.row + int(rng.integers(-margin, margin + 1)), 0), height - 1),
        min(max(near.col + int(rng.integers(-margin, margin + 1)), 0), width - 1),
    )
    path = [start]
    target = waypoint()
    while len(path) < length:
        cur = path[-1]
        if cur == target:
            target = waypoint() if rng.random() < 0.7 else CellPos(
                min(max(toward.row + int(rng.integers(-margin, margin + 1)), 0), height - 1),
                min(max(toward.col + int(rng.integers(-margin, margin + 1)), 0), width - 1),
            )
            continue
        # row-first or col-first leg, chosen per step
        if cur.row != target.row and (cur.col == target.col or rng.random() < 0.5):
            step = CellPos(cur.row + (1 if target.row > cur.row else -1), cur.col)
        else:
            step = CellPos(cur.row, cur.col + (1 if target.col > cur.col else -1))
        path.append(step)
    return tuple(path[:length])
