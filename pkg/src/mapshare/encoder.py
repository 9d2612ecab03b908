"""Supporter-side selection of the transmitted map compression.

Each step the supporter scores every template: it simulates the seeker's
decoder on the candidate message, measures the weighted reconstruction
error along the seeker's announced path corridor (only over cells the
supporter has actually sensed), adds a bandwidth price, and transmits
the cheapest candidate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .abstraction import (
    AbstractionMessage,
    AbstractionTemplate,
    BitCostParams,
    apply_template,
)
from .constraints import ConstraintStore
from .decoder import PriorModel, estimate
from .grid_world import LocalMap
from .planner import PlannedPath

__all__ = [
    "PathWeightField",
    "SupporterBelief",
    "CandidateScore",
    "SelectionResult",
    "path_weights",
    "criterion",
    "select_abstraction",
]

WEIGHT_FLOOR = 1e-300  # keeps far-field weights strictly positive


@dataclass(frozen=True, eq=False)
class PathWeightField:
    """Per-cell relevance weights around a planned path."""

    weights: np.ndarray
    sigma: float


def path_weights(
    path: PlannedPath, sigma: float, width: int, height: int
) -> PathWeightField:
    """Gaussian falloff from the nearest path vertex.

    w(p) = exp(-d^2 / (2 sigma^2)) with d the Euclidean distance (in
    cells) to the closest vertex, so cells on the path weigh exactly 1.
    """
    if not path.vertices:
        raise ValueError("path must be nonempty")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    rows, cols = np.indices((height, width))
    d2 = np.full((height, width), np.inf)
    for v in path.vertices:
        cand = (rows - v.row) ** 2 + (cols - v.col) ** 2
        np.minimum(d2, cand, out=d2)
    w = np.exp(-d2.ravel() / (2.0 * sigma * sigma))
    return PathWeightField(weights=np.maximum(w, WEIGHT_FLOOR), sigma=sigma)


@dataclass
class SupporterBelief:
    """What the supporter knows: its own sensed cells (ground truth),
    the cells the seeker must have sensed (derived from seeker poses),
    and the bandwidth price model."""

    n_cells: int
    sensed_values: dict[int, float] = field(default_factory=dict)
    seeker_sensed: set[int] = field(default_factory=set)
    beta: float = 0.002
    comm_table: dict[int, float] | None = None

    def sense_local(self, lm: LocalMap) -> None:
        for cell, value in zip(lm.cells, lm.values):
            self.sensed_values.setdefault(cell, float(value))

    def mark_seeker(self, cells) -> None:
        self.seeker_sensed.update(cells)

    def comm_cost(self, theta: int, bits: int) -> float:
        """Price of transmitting `bits` with template `theta`."""
        if self.comm_table is not None:
            return float(self.comm_table[theta])
        return self.beta * bits

    @property
    def sensed_set(self) -> set[int]:
        return set(self.sensed_values)


def criterion(
    weights: PathWeightField,
    belief: SupporterBelief,
    est_values: np.ndarray,
    comm: float,
) -> float:
    """Selection score: weighted squared reconstruction error over the
    supporter-sensed cells plus the bandwidth price."""
    if not belief.sensed_values:
        return comm
    idx = np.fromiter(belief.sensed_values.keys(), dtype=int)
    truth = np.fromiter(belief.sensed_values.values(), dtype=float)
    err = weights.weights[idx] * (truth - est_values[idx])
    return float(err @ err) + comm


@dataclass(eq=False)
class CandidateScore:
    """Per-template evaluation record."""

    theta: int
    score: float
    error_term: float
    comm_cost: float
    bits: int
    k_effective: int
    message: AbstractionMessage
    est_values: np.ndarray | None = None


@dataclass(eq=False)
class SelectionResult:
    theta: int | None
    message: AbstractionMessage | None
    candidates: list[CandidateScore]

    @property
    def transmitted(self) -> bool:
        return self.message is not None


def select_abstraction(
    weights: PathWeightField,
    belief: SupporterBelief,
    store: ConstraintStore,
    theta_set: tuple[AbstractionTemplate, ...],
    seeker_lm: LocalMap,
    supporter_lm: LocalMap,
    bits: BitCostParams,
    prior: PriorModel | None = None,
    *,
    keep_estimates: bool = False,
    nominal_bits: bool = False,
) -> SelectionResult:
    """One selection step on the supporter's replica of the seeker state.

    First folds in exact values for cells both robots can account for:
    supporter-window cells the seeker has already sensed, and current
    seeker-window cells the supporter has sensed (the supporter knows
    the seeker's poses, hence its sensing footprint). Then evaluates
    every template with the already-known cells excluded from averaging
    and returns the score minimizer, lowest template id on ties. The
    replica store is updated with the exact values but NOT the winning
    message; committing the transmission is the caller's move.

    `belief.sense_local(supporter_lm)` must have run beforehand.
    """
    update_cells = set(supporter_lm.cells) & belief.seeker_sensed
    update_cells |= set(seeker_lm.cells) & set(belief.sensed_values)
    store.add_exact(
        (cell, belief.sensed_values[cell])
        for cell in sorted(update_cells)
        if cell in belief.sensed_values
    )
    excluded = set(store.known)

    best: CandidateScore | None = None
    candidates: list[CandidateScore] = []
    for tpl in theta_set:
        msg = apply_template(tpl, supporter_lm, excluded, bits, nominal_bits=nominal_bits)
        if msg.empty:
            continue
        cand_store = store.copy()
        cand_store.add_message(msg).reduce_independent()
        est = estimate(cand_store, prior)
        comm = belief.comm_cost(tpl.tpl_id, msg.bits)
        error_term = criterion(weights, belief, est.values, 0.0)
        cand = CandidateScore(
            theta=tpl.tpl_id,
            score=error_term + comm,
            error_term=error_term,
            comm_cost=comm,
            bits=msg.bits,
            k_effective=msg.k_effective,
            message=msg,
            est_values=est.values if keep_estimates else None,
        )
        candidates.append(cand)
        if best is None or cand.score < best.score:
            best = cand
    if best is None:
        return SelectionResult(theta=None, message=None, candidates=candidates)
    return SelectionResult(theta=best.theta, message=best.message, candidates=candidates)
