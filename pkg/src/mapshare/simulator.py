"""Closed-loop two-robot scenario runs and batch metrics.

Per timestep: the seeker senses its window and pins those cells; the
supporter (while its transmission horizon lasts) either sends every cell
it has not sent before (FI), runs the template selection against the
seeker's last announced path (AS), or stays silent (U); the seeker then
re-estimates the map, replans, and moves one action along the plan while
the supporter advances along its predefined route. Accumulated cost is
always charged against ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .abstraction import AbstractionTemplate, BitCostParams, default_theta_set
from .constraints import ConstraintStore
from .decoder import BeliefEstimate, PriorModel, estimate
from .encoder import (
    CandidateScore,
    SupporterBelief,
    path_weights,
    select_abstraction,
)
from .grid_world import CellPos, WorldMap, local_window
from .planner import PlannedPath, PlannerConfig, cost_map, shortest_path

__all__ = [
    "FRAMEWORKS",
    "ScenarioConfig",
    "StepRecord",
    "ScenarioResult",
    "ReplicaTraceEntry",
    "BatchMetrics",
    "run_scenario",
    "accumulated_cost",
    "batch_metrics",
]

FRAMEWORKS = ("FI", "AS", "U")

COST_EQ_TOL = 1e-9  # accumulated costs closer than this count as equal


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Everything one scenario needs; shared verbatim by all frameworks."""

    world: WorldMap
    seeker_start: CellPos
    seeker_goal: CellPos
    supporter_path: tuple[CellPos, ...]
    t_b_max: int
    seeker_fov: tuple[int, int] = (5, 5)
    supporter_fov: tuple[int, int] = (7, 7)
    move_cost: float = 0.025
    epsilon: float = 0.501
    sigma: float = 10.0
    bits: BitCostParams = BitCostParams()
    beta: float = 0.002
    theta_set: tuple[AbstractionTemplate, ...] | None = None
    theta_count: int = 10
    step_cap: int | None = None
    seed: int = 0

    def __post_init__(self):
        for pos, name in (
            (self.seeker_start, "seeker_start"),
            (self.seeker_goal, "seeker_goal"),
        ):
            if not self.world.in_bounds(pos):
                raise ValueError(f"{name} {pos} outside the map")
        if not self.supporter_path:
            raise ValueError("supporter_path must be nonempty")
        for pos in self.supporter_path:
            if not self.world.in_bounds(pos):
                raise ValueError(f"supporter path cell {pos} outside the map")
        if self.t_b_max < 0:
            raise ValueError("t_b_max must be >= 0")
        if self.t_b_max > len(self.supporter_path):
            raise ValueError(
                f"t_b_max {self.t_b_max} exceeds supporter path length "
                f"{len(self.supporter_path)}"
            )
        for w, h in (self.seeker_fov, self.supporter_fov):
            if w <= 0 or h <= 0 or w % 2 == 0 or h % 2 == 0:
                raise ValueError("fields of view must be odd and positive")
        theta_set = self.resolved_theta_set()
        need = math.ceil(math.log2(len(theta_set))) if len(theta_set) > 1 else 0
        if self.bits.index_bits < need:
            raise ValueError(
                f"index_bits {self.bits.index_bits} cannot address "
                f"{len(theta_set)} templates (need {need})"
            )

    def planner_config(self) -> PlannerConfig:
        return PlannerConfig(
            n_cells=self.world.n, move_cost=self.move_cost, epsilon=self.epsilon
        )

    def resolved_theta_set(self) -> tuple[AbstractionTemplate, ...]:
        if self.theta_set is not None:
            return self.theta_set
        return default_theta_set(
            self.supporter_fov[0], self.supporter_fov[1], self.theta_count
        )

    def resolved_step_cap(self) -> int:
        return self.step_cap if self.step_cap is not None else 20 * self.world.n


@dataclass(eq=False)
class StepRecord:
    t: int
    seeker_pos: CellPos
    supporter_pos: CellPos | None
    theta: int | None
    bits: int
    k_effective: int
    candidates: list[CandidateScore] | None = None


@dataclass(eq=False)
class ScenarioResult:
    framework: str
    trajectory: tuple[CellPos, ...]
    cost: float
    total_bits: int
    steps: list[StepRecord]
    reached: bool

    @property
    def n_steps(self) -> int:
        return len(self.trajectory) - 1


@dataclass(eq=False)
class ReplicaTraceEntry:
    """Supporter-predicted vs seeker-actual decoder state for one step."""

    t: int
    stores_match: bool
    predicted: np.ndarray | None
    actual: np.ndarray


def accumulated_cost(
    trajectory: Sequence[CellPos], world: WorldMap, cfg: PlannerConfig
) -> float:
    """Ground-truth traversal cost, duplicates included."""
    if not trajectory:
        raise ValueError("trajectory must be nonempty")
    total = 0.0
    for pos in trajectory:
        occ = world.value(pos)
        total += occ + cfg.move_cost if occ <= cfg.epsilon else cfg.infeasible_cost
    return total


OnStep = Callable[[StepRecord, np.ndarray, PlannedPath], None]


def run_scenario(
    cfg: ScenarioConfig,
    framework: str,
    *,
    on_step: OnStep | None = None,
    collect_candidates: bool = False,
    replica_trace: list[ReplicaTraceEntry] | None = None,
) -> ScenarioResult:
    """Run one scenario under a framework. Deterministic given cfg."""
    if framework not in FRAMEWORKS:
        raise ValueError(f"unknown framework {framework!r}")
    world = cfg.world
    pcfg = cfg.planner_config()
    prior = PriorModel(mean=0.5)
    theta_set = cfg.resolved_theta_set()

    seeker_store = ConstraintStore(world.n)
    replica = ConstraintStore(world.n)
    belief = SupporterBelief(n_cells=world.n, beta=cfg.beta)
    fi_sent: set[int] = set()

    pos = cfg.seeker_start
    trajectory = [pos]
    steps: list[StepRecord] = []
    records_bits = 0
    shared_path: PlannedPath | None = None
    prev_est: np.ndarray | None = None
    reached = False
    step_cap = cfg.resolved_step_cap()

    def decode() -> BeliefEstimate:
        nonlocal prev_est
        est = estimate(seeker_store, prior, warm_start=prev_est)
        prev_est = est.values
        return est

    def plan(est_values: np.ndarray, start: CellPos) -> PlannedPath:
        return shortest_path(
            cost_map(est_values, pcfg),
            start,
            cfg.seeker_goal,
            pcfg,
            world.width,
            world.height,
        )

    for t in range(step_cap + 1):
        if pos == cfg.seeker_goal:
            reached = True
            break

        # 1. seeker senses its window and pins the true values
        lm_a = local_window(world, pos, *cfg.seeker_fov)
        seeker_store.add_exact(
            (cell, float(world.occupancy[cell])) for cell in lm_a.cells
        )

        # 2. supporter senses while it is still travelling
        supporter_pos = None
        lm_b = None
        if framework != "U" and t < len(cfg.supporter_path):
            supporter_pos = cfg.supporter_path[t]
            lm_b = local_window(world, supporter_pos, *cfg.supporter_fov)
            belief.sense_local(lm_b)
            belief.mark_seeker(lm_a.cells)

        # 3. communication
        theta_t: int | None = None
        bits_t = 0
        k_eff = 0
        candidates = None
        predicted: np.ndarray | None = None
        if lm_b is not None and t < cfg.t_b_max:
            if framework == "FI":
                new_cells = [c for c in lm_b.cells if c not in fi_sent]
                if new_cells:
                    seeker_store.add_exact(
                        (c, float(world.occupancy[c])) for c in new_cells
                    )
                    fi_sent.update(new_cells)
                    bits_t = len(new_cells) * cfg.bits.value_bits
                    k_eff = len(new_cells)
            else:  # AS
                if shared_path is None:
                    shared_path = plan(decode().values, pos)
                weights = path_weights(
                    shared_path, cfg.sigma, world.width, world.height
                )
                sel = select_abstraction(
                    weights,
                    belief,
                    replica,
                    theta_set,
                    lm_a,
                    lm_b,
                    cfg.bits,
                    prior,
                    keep_estimates=replica_trace is not None,
                )
                if sel.transmitted:
                    seeker_store.add_message(sel.message).reduce_independent()
                    replica.add_message(sel.message).reduce_independent()
                    theta_t = sel.theta
                    bits_t = sel.message.bits
                    k_eff = sel.message.k_effective
                    if replica_trace is not None:
                        predicted = next(
                            c.est_values
                            for c in sel.candidates
                            if c.theta == sel.theta
                        )
                if collect_candidates:
                    candidates = sel.candidates

        # 4. decode and replan from the updated constraint set
        est = decode()
        path_t = plan(est.values, pos)
        shared_path = path_t

        if replica_trace is not None and theta_t is not None:
            replica_trace.append(
                ReplicaTraceEntry(
                    t=t,
                    stores_match=seeker_store.same_solution_set(replica),
                    predicted=predicted,
                    actual=est.values,
                )
            )

        record = StepRecord(
            t=t,
            seeker_pos=pos,
            supporter_pos=supporter_pos,
            theta=theta_t,
            bits=bits_t,
            k_effective=k_eff,
            candidates=candidates,
        )
        steps.append(record)
        records_bits += bits_t
        if on_step is not None:
            on_step(record, est.values, path_t)

        # 5. both robots move
        if len(path_t.vertices) > 1:
            pos = path_t.vertices[1]
        trajectory.append(pos)
    else:
        reached = pos == cfg.seeker_goal

    return ScenarioResult(
        framework=framework,
        trajectory=tuple(trajectory),
        cost=accumulated_cost(trajectory, world, pcfg),
        total_bits=records_bits,
        steps=steps,
        reached=reached,
    )


@dataclass
class BatchMetrics:
    """Cross-framework ensemble metrics in the style of the result tables."""

    n_sim: int
    failures: dict[str, int]
    neutral: int
    r_time: dict[str, float]
    r_bits: float | None


def batch_metrics(
    per_sim: Sequence[Mapping[str, ScenarioResult]],
) -> BatchMetrics:
    """Aggregate one result per framework per simulation.

    r_time averages each framework's cost against the per-simulation
    best; r_bits averages AS bits over FI bits; a framework fails a
    simulation when its cost is strictly highest; a simulation is
    neutral when all three costs coincide.
    """
    if not per_sim:
        raise ValueError("no simulations given")
    for i, sim in enumerate(per_sim):
        missing = [fw for fw in FRAMEWORKS if fw not in sim]
        if missing:
            raise ValueError(f"simulation {i} missing frameworks {missing}")
    failures = {fw: 0 for fw in FRAMEWORKS}
    ratio_sum = {fw: 0.0 for fw in FRAMEWORKS}
    neutral = 0
    bit_ratios: list[float] = []
    for sim in per_sim:
        costs = {fw: sim[fw].cost for fw in FRAMEWORKS}
        best = min(costs.values())
        worst = max(costs.values())
        for fw in FRAMEWORKS:
            ratio_sum[fw] += costs[fw] / best
        if worst - best <= COST_EQ_TOL:
            neutral += 1
        else:
            at_worst = [fw for fw in FRAMEWORKS if abs(costs[fw] - worst) <= COST_EQ_TOL]
            if len(at_worst) == 1:
                failures[at_worst[0]] += 1
        fi_bits = sim["FI"].total_bits
        if fi_bits > 0:
            bit_ratios.append(sim["AS"].total_bits / fi_bits)
    n = len(per_sim)
    return BatchMetrics(
        n_sim=n,
        failures=failures,
        neutral=neutral,
        r_time={fw: ratio_sum[fw] / n for fw in FRAMEWORKS},
        r_bits=(sum(bit_ratios) / len(bit_ratios)) if bit_ratios else None,
    )
