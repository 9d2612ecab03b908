"""Batch experiment runner and tooling.

Subcommands:
  run                 execute an experiment spec (INI) across FI/AS/U
  validate-templates  structural checks on a template file
  gen-maps            emit seeded random desk-scale maps as CSV

Experiment specs are flat INI files; see the README for the full key
reference. Every run writes a fully resolved copy of its configuration
next to the results so it can be reproduced verbatim.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .abstraction import (
    BitCostParams,
    default_theta_set,
    load_templates,
    validate_theta_set,
)
from .grid_world import CellPos, WorldMap, load_map, save_map
from .mapgen import (
    MapGenParams,
    feasible_endpoints,
    generate_scenario_world,
    generate_world,
    random_supporter_path,
)
from .simulator import (
    FRAMEWORKS,
    ScenarioConfig,
    batch_metrics,
    run_scenario,
)

__all__ = ["ExperimentSpec", "load_experiment", "run_experiment", "main"]

OUT_ENV = "MAPSHARE_OUT"
SWEEPS = ("supporter_path", "seeker_endpoints")


@dataclass(eq=False)
class ExperimentSpec:
    """Parsed experiment: a base scenario plus a sweep axis."""

    world: WorldMap
    map_label: str
    seeker_start: CellPos | None
    seeker_goal: CellPos | None
    seeker_fov: tuple[int, int]
    supporter_path: tuple[CellPos, ...] | None
    supporter_fov: tuple[int, int]
    t_b_max: int
    move_cost: float
    epsilon: float
    sigma: float
    beta: float
    bits: BitCostParams
    templates_label: str
    theta_count: int
    theta_set: tuple | None
    sweep: str
    n_sim: int
    seed: int
    step_cap: int | None


def _parse_pos(text: str) -> CellPos:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"expected 'row,col', got {text!r}")
    return CellPos(int(parts[0]), int(parts[1]))


def _parse_fov(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"expected 'WxH', got {text!r}")
    return int(parts[0]), int(parts[1])


def _parse_path(text: str) -> tuple[CellPos, ...]:
    return tuple(_parse_pos(tok) for tok in text.split())


def load_experiment(path: str | os.PathLike) -> ExperimentSpec:
    """Read and validate an experiment spec file."""
    path = Path(path)
    ini = configparser.ConfigParser()
    read = ini.read(path)
    if not read:
        raise FileNotFoundError(path)
    here = path.parent

    def get(section, key, default=None, cast=str):
        if ini.has_option(section, key):
            return cast(ini.get(section, key))
        if default is None:
            raise ValueError(f"spec {path}: missing [{section}] {key}")
        return default

    map_source = get("map", "source")
    if map_source == "generate":
        params = MapGenParams(
            width=get("map", "width", 24, int),
            height=get("map", "height", 24, int),
            epsilon=get("planner", "epsilon", 0.501, float),
        )
        map_seed = get("map", "seed", 0, int)
        world = generate_world(params, np.random.default_rng(map_seed))
        map_label = f"generate:{params.width}x{params.height}:seed={map_seed}"
    elif map_source.startswith("bundled:"):
        from . import bundled_map

        world = bundled_map(map_source.split(":", 1)[1])
        map_label = map_source
    else:
        world = load_map(here / map_source if not os.path.isabs(map_source) else map_source)
        map_label = map_source

    tpl_source = get("templates", "source", "default")
    theta_count = get("templates", "count", 10, int)
    supporter_fov = _parse_fov(get("supporter", "fov", "7x7"))
    if tpl_source == "default":
        theta_set = None
        templates_label = f"default:{theta_count}"
    else:
        tpl_path = here / tpl_source if not os.path.isabs(tpl_source) else Path(tpl_source)
        w, h, theta_set = load_templates(tpl_path)
        if (w, h) != supporter_fov:
            raise ValueError(
                f"template window {w}x{h} does not match supporter fov "
                f"{supporter_fov[0]}x{supporter_fov[1]}"
            )
        theta_count = len(theta_set)
        templates_label = tpl_source

    sweep = get("experiment", "sweep", "supporter_path")
    if sweep not in SWEEPS:
        raise ValueError(f"unknown sweep {sweep!r}; choose from {SWEEPS}")

    raw_path = get("supporter", "path", "auto")
    supporter_path = None if raw_path == "auto" else _parse_path(raw_path)

    start = get("seeker", "start", "", str)
    goal = get("seeker", "goal", "", str)
    spec = ExperimentSpec(
        world=world,
        map_label=map_label,
        seeker_start=_parse_pos(start) if start else None,
        seeker_goal=_parse_pos(goal) if goal else None,
        seeker_fov=_parse_fov(get("seeker", "fov", "5x5")),
        supporter_path=supporter_path,
        supporter_fov=supporter_fov,
        t_b_max=get("supporter", "t_b_max", 60, int),
        move_cost=get("planner", "move_cost", 0.025, float),
        epsilon=get("planner", "epsilon", 0.501, float),
        sigma=get("encoder", "sigma", 10.0, float),
        beta=get("encoder", "beta", 0.002, float),
        bits=BitCostParams(
            value_bits=get("bits", "value_bits", 12, int),
            index_bits=get("bits", "index_bits", 4, int),
        ),
        templates_label=templates_label,
        theta_count=theta_count,
        theta_set=theta_set,
        sweep=sweep,
        n_sim=get("experiment", "n_sim", 1, int),
        seed=get("experiment", "seed", 0, int),
        step_cap=get("experiment", "step_cap", 0, int) or None,
    )
    if spec.n_sim < 1:
        raise ValueError("n_sim must be >= 1")
    if spec.sweep == "supporter_path" and (spec.seeker_start is None or spec.seeker_goal is None):
        raise ValueError("supporter_path sweep needs fixed seeker start/goal")
    return spec


def _sim_rng(spec: ExperimentSpec, sim: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(sim,)))


def scenario_for(spec: ExperimentSpec, sim: int) -> ScenarioConfig:
    """Materialize the scenario for one simulation index."""
    rng = _sim_rng(spec, sim)
    start, goal = spec.seeker_start, spec.seeker_goal
    supporter_path = spec.supporter_path
    if spec.sweep == "seeker_endpoints":
        if sim > 0 or start is None or goal is None:
            pair = feasible_endpoints(spec.world, rng, spec.epsilon)
            if pair is None:
                raise RuntimeError(f"sim {sim}: no feasible endpoints on this map")
            start, goal = pair
        if supporter_path is None:
            supporter_path = random_supporter_path(
                _sim_rng(spec, -1),
                spec.world.width,
                spec.world.height,
                max(spec.t_b_max, 1),
                start,
                goal,
            )
    else:  # supporter_path sweep
        if supporter_path is None or sim > 0:
            supporter_path = random_supporter_path(
                rng,
                spec.world.width,
                spec.world.height,
                max(spec.t_b_max, 1),
                start,
                goal,
            )
    return ScenarioConfig(
        world=spec.world,
        seeker_start=start,
        seeker_goal=goal,
        supporter_path=supporter_path,
        t_b_max=min(spec.t_b_max, len(supporter_path)),
        seeker_fov=spec.seeker_fov,
        supporter_fov=spec.supporter_fov,
        move_cost=spec.move_cost,
        epsilon=spec.epsilon,
        sigma=spec.sigma,
        bits=spec.bits,
        beta=spec.beta,
        theta_set=spec.theta_set,
        theta_count=spec.theta_count,
        step_cap=spec.step_cap,
        seed=spec.seed,
    )


# ------------------------------------------------------------ frames

_RED = np.array([220, 40, 40], dtype=np.uint8)
_GREEN = np.array([40, 180, 60], dtype=np.uint8)
_BLUE = np.array([50, 80, 230], dtype=np.uint8)


def write_ppm(path, rgb: np.ndarray) -> None:
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.astype(np.uint8).tobytes())


def render_frame(
    width: int,
    height: int,
    est_values: np.ndarray,
    trajectory,
    planned,
    supporter_path,
) -> np.ndarray:
    """Estimate as grayscale with route overlays (supporter red,
    planned green, traversed blue)."""
    gray = np.rint((1.0 - est_values) * 255.0).astype(np.uint8)
    rgb = np.repeat(gray.reshape(height, width, 1), 3, axis=2)
    for pos in supporter_path:
        rgb[pos.row, pos.col] = _RED
    for pos in planned:
        rgb[pos.row, pos.col] = _GREEN
    for pos in trajectory:
        rgb[pos.row, pos.col] = _BLUE
    return rgb


# ------------------------------------------------------------ run

@dataclass(eq=False)
class _SimJob:
    sim: int
    cfg: ScenarioConfig
    frames_dir: str | None
    seed: int


def _run_sim(job: _SimJob):
    """Worker: run all frameworks for one simulation."""
    results = {}
    step_logs = {}
    for fw in FRAMEWORKS:
        frames = []
        trajectory = []

        def on_step(record, est_values, path_t, _frames=frames, _traj=trajectory):
            _traj.append(record.seeker_pos)
            _frames.append((record.t, est_values.copy(), path_t.vertices))

        collect = job.frames_dir is not None
        res = run_scenario(
            job.cfg,
            fw,
            on_step=on_step if collect else None,
            collect_candidates=collect,
        )
        results[fw] = res
        if collect:
            fw_dir = Path(job.frames_dir) / f"sim{job.sim:03d}" / fw
            fw_dir.mkdir(parents=True, exist_ok=True)
            shown = []
            for t, est_values, planned in frames:
                shown.append(trajectory[len(shown)])
                frame = render_frame(
                    job.cfg.world.width,
                    job.cfg.world.height,
                    est_values,
                    shown,
                    planned,
                    job.cfg.supporter_path,
                )
                write_ppm(fw_dir / f"t{t:04d}.ppm", frame)
            _write_step_log(fw_dir / "steps.csv", res)
    rows = []
    for fw in FRAMEWORKS:
        res = results[fw]
        rows.append(
            {
                "sim": job.sim,
                "framework": fw,
                "seed": job.seed,
                "cost": res.cost,
                "bits": res.total_bits,
                "steps": res.n_steps,
                "reached": int(res.reached),
            }
        )
    return job.sim, rows, {fw: results[fw] for fw in FRAMEWORKS}


def _write_step_log(path, result) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("t,theta,k_effective,bits,candidate_scores\n")
        for rec in result.steps:
            cands = ""
            if rec.candidates:
                cands = ";".join(f"{c.theta}:{c.score!r}" for c in rec.candidates)
            theta = "" if rec.theta is None else rec.theta
            fh.write(f"{rec.t},{theta},{rec.k_effective},{rec.bits},{cands}\n")


def _echo_config(spec: ExperimentSpec, out: Path, jobs: int, frames: bool) -> None:
    ini = configparser.ConfigParser()
    ini["map"] = {
        "source": spec.map_label,
        "width": str(spec.world.width),
        "height": str(spec.world.height),
    }
    ini["planner"] = {"move_cost": repr(spec.move_cost), "epsilon": repr(spec.epsilon)}
    ini["bits"] = {
        "value_bits": str(spec.bits.value_bits),
        "index_bits": str(spec.bits.index_bits),
    }
    ini["encoder"] = {"sigma": repr(spec.sigma), "beta": repr(spec.beta)}
    ini["templates"] = {"source": spec.templates_label, "count": str(spec.theta_count)}
    ini["seeker"] = {
        "start": "" if spec.seeker_start is None else f"{spec.seeker_start.row},{spec.seeker_start.col}",
        "goal": "" if spec.seeker_goal is None else f"{spec.seeker_goal.row},{spec.seeker_goal.col}",
        "fov": f"{spec.seeker_fov[0]}x{spec.seeker_fov[1]}",
    }
    ini["supporter"] = {
        "path": "auto"
        if spec.supporter_path is None
        else " ".join(f"{p.row},{p.col}" for p in spec.supporter_path),
        "fov": f"{spec.supporter_fov[0]}x{spec.supporter_fov[1]}",
        "t_b_max": str(spec.t_b_max),
    }
    ini["experiment"] = {
        "sweep": spec.sweep,
        "n_sim": str(spec.n_sim),
        "seed": str(spec.seed),
        "step_cap": "" if spec.step_cap is None else str(spec.step_cap),
        "jobs": str(jobs),
        "frames": str(int(frames)),
    }
    with open(out / "config.ini", "w", encoding="ascii") as fh:
        ini.write(fh)


def run_experiment(
    spec: ExperimentSpec, out_dir: str | os.PathLike, jobs: int = 1, frames: bool = False
) -> int:
    """Execute all simulations of a spec and write results + metrics."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _echo_config(spec, out, jobs, frames)
    save_map(spec.world, out / "map.csv")
    if frames:
        truth = render_frame(
            spec.world.width,
            spec.world.height,
            spec.world.occupancy,
            [],
            [],
            [],
        )
        write_ppm(out / "ground_truth.ppm", truth)

    jobs_list = [
        _SimJob(
            sim=i,
            cfg=scenario_for(spec, i),
            frames_dir=str(out / "frames") if frames else None,
            seed=spec.seed,
        )
        for i in range(spec.n_sim)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_sim, jobs_list))
    else:
        outcomes = [_run_sim(job) for job in jobs_list]
    outcomes.sort(key=lambda item: item[0])

    with open(out / "results.csv", "w", encoding="ascii") as fh:
        fh.write("sim,framework,seed,cost,bits,steps,reached\n")
        for _, rows, _ in outcomes:
            for row in rows:
                fh.write(
                    f"{row['sim']},{row['framework']},{row['seed']},"
                    f"{row['cost']!r},{row['bits']},{row['steps']},{row['reached']}\n"
                )

    metrics = batch_metrics([per_fw for _, _, per_fw in outcomes])
    with open(out / "metrics.csv", "w", encoding="ascii") as fh:
        fh.write("framework,failures,neutral,r_time,r_bits\n")
        for fw in FRAMEWORKS:
            r_bits = ""
            if fw == "AS" and metrics.r_bits is not None:
                r_bits = repr(metrics.r_bits)
            fh.write(
                f"{fw},{metrics.failures[fw]},{metrics.neutral},"
                f"{metrics.r_time[fw]!r},{r_bits}\n"
            )
    return 0


# ------------------------------------------------------------ commands

def _cmd_run(args) -> int:
    try:
        spec = load_experiment(args.spec)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = args.out or os.environ.get(OUT_ENV) or "mapshare-out"
    return run_experiment(spec, out, jobs=args.jobs, frames=args.frames)


def _cmd_validate_templates(args) -> int:
    try:
        w, h, templates = load_templates(args.file)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    issues = validate_theta_set(templates, w, h)
    for tpl in templates:
        covered = len(tpl.coverage)
        print(f"template {tpl.tpl_id}: k={tpl.k}, covers {covered}/{w * h} offsets")
    if issues:
        for issue in issues:
            print(f"INVALID: {issue}", file=sys.stderr)
        return 1
    print(f"{len(templates)} templates OK for a {w}x{h} window")
    return 0


def _cmd_gen_maps(args) -> int:
    try:
        width, height = _parse_fov(args.size)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    params = MapGenParams(width=width, height=height)
    for i in range(args.count):
        rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(i,)))
        world = generate_world(params, rng)
        dest = out / f"map_{args.seed}_{i:03d}.csv"
        save_map(world, dest)
        print(dest)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mapshare",
        description="communication-aware two-robot navigation simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment spec")
    run_p.add_argument("--spec", required=True, help="experiment INI file")
    run_p.add_argument("--jobs", type=int, default=1, help="parallel simulations")
    run_p.add_argument("--frames", action="store_true", help="dump per-step frames")
    run_p.add_argument("--out", default=None, help=f"output dir (default ${OUT_ENV})")
    run_p.set_defaults(func=_cmd_run)

    val_p = sub.add_parser("validate-templates", help="check a template file")
    val_p.add_argument("file")
    val_p.set_defaults(func=_cmd_validate_templates)

    gen_p = sub.add_parser("gen-maps", help="generate random maps")
    gen_p.add_argument("--seed", type=int, required=True)
    gen_p.add_argument("--count", type=int, default=1)
    gen_p.add_argument("--size", default="24x24", help="WxH")
    gen_p.add_argument("--out", default=None)
    gen_p.set_defaults(func=_cmd_gen_maps)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
