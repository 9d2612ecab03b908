"""Communication-aware two-robot grid navigation.

A supporter robot on a predefined route compresses its local occupancy
map with bandwidth-priced averaging templates and transmits the pick to
a seeker, which reconstructs the environment by projecting a prior onto
the accumulated measurement constraints and replans its shortest path
every step.
"""

from importlib import resources as _resources

from .abstraction import (
    AbstractionMessage,
    AbstractionTemplate,
    BitCostParams,
    apply_template,
    default_theta_set,
    load_templates,
    save_templates,
)
from .constraints import ConstraintStore, InconsistentConstraintError
from .decoder import (
    BeliefEstimate,
    PriorModel,
    SolverError,
    estimate,
    kkt_certificate,
    saa_check,
)
from .encoder import (
    PathWeightField,
    SupporterBelief,
    criterion,
    path_weights,
    select_abstraction,
)
from .grid_world import (
    CellPos,
    LocalMap,
    MapFormatError,
    MapValueError,
    WorldMap,
    load_map,
    local_window,
    save_map,
)
from .mapgen import (
    MapGenParams,
    generate_scenario_world,
    generate_world,
    random_supporter_path,
)
from .planner import (
    NoPathError,
    PlannedPath,
    PlannerConfig,
    cell_cost,
    cost_map,
    shortest_path,
)
from .simulator import (
    FRAMEWORKS,
    BatchMetrics,
    ScenarioConfig,
    ScenarioResult,
    accumulated_cost,
    batch_metrics,
    run_scenario,
)

__version__ = "0.1.0"

BUNDLED_MAPS = ("office32", "maze24")


def bundled_map(name: str) -> WorldMap:
    """Load one of the maps shipped with the package."""
    if name not in BUNDLED_MAPS:
        raise ValueError(f"unknown bundled map {name!r}; choose from {BUNDLED_MAPS}")
    ref = _resources.files(__name__) / "maps" / f"{name}.csv"
    with _resources.as_file(ref) as path:
        return load_map(path)
