"""Scenario construction and first-come-first-served batch planning."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .exceptions import InfeasibleScenario, PlanningError
from .grid import BlockIndex, GridSpec, block_of_point, center
from .occupancy import (
    BuildingFootprint,
    OccupancyLedger,
    load_buildings,
    rasterize_buildings,
)
from .performance import AircraftPerformance, default_fleet, load_fleet
from .search import DEFAULT_HOVER_THRESHOLD, astar_trajectory, cfa_star, reserve_trajectory

# Share of blocks covered by buildings per layer in the reference city
# district: 3925, 1286 and 189 of 100 x 100 blocks.
REFERENCE_LAYER_COVERAGE = (0.3925, 0.1286, 0.0189)


@dataclass(frozen=True)
class FlightPlan:
    id: str
    origin: tuple[float, float, float]
    destination: tuple[float, float, float]
    t_dep: float
    aircraft: str

    def to_row(self) -> dict:
        ox, oy, oz = self.origin
        dx, dy, dz = self.destination
        return {"id": self.id, "ox": ox, "oy": oy, "oz": oz, "dx": dx, "dy": dy, "dz": dz,
                "t_dep": self.t_dep, "aircraft": self.aircraft}

    @classmethod
    def from_row(cls, row: dict) -> "FlightPlan":
        return cls(
            id=str(row["id"]),
            origin=(float(row["ox"]), float(row["oy"]), float(row["oz"])),
            destination=(float(row["dx"]), float(row["dy"]), float(row["dz"])),
            t_dep=float(row["t_dep"]),
            aircraft=str(row["aircraft"]),
        )


PLAN_COLUMNS = ["id", "ox", "oy", "oz", "dx", "dy", "dz", "t_dep", "aircraft"]


def dump_plans_csv(plans, fh) -> None:
    w = csv.DictWriter(fh, fieldnames=PLAN_COLUMNS, lineterminator="\n")
    w.writeheader()
    for p in plans:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in p.to_row().items()})


def write_plans(plans, path) -> None:
    path = str(path)
    if path.endswith(".json"):
        with open(path, "w") as fh:
            json.dump([p.to_row() for p in plans], fh, indent=1)
        return
    with open(path, "w", newline="") as fh:
        dump_plans_csv(plans, fh)


def read_plans(path) -> list[FlightPlan]:
    path = str(path)
    if path.endswith(".json"):
        with open(path) as fh:
            return [FlightPlan.from_row(r) for r in json.load(fh)]
    with open(path, newline="") as fh:
        return [FlightPlan.from_row(r) for r in csv.DictReader(fh)]


@dataclass
class ScenarioConfig:
    seed: int = 0
    count: int = 300
    window: float = 300.0
    scale: float = 0.6
    hover_threshold: float = DEFAULT_HOVER_THRESHOLD
    dt: float = 1.0
    grid: dict = field(default_factory=lambda: GridSpec().to_dict())
    # fleet file path, or None for the four built-in aircraft
    fleet: str | None = None
    # list of aircraft names to draw from; None means every fleet entry
    aircraft: list | None = None
    # buildings file path, or "synthetic" to generate from the seed
    buildings: str | None = "synthetic"
    layer_coverage: tuple = REFERENCE_LAYER_COVERAGE
    landing_hold: float | None = None
    ground_hold: float = 0.0

    def __post_init__(self):
        if not self.window > 0:
            raise ValueError(f"departure window must be positive, got {self.window}")
        if self.count < 0:
            raise ValueError(f"flight count must be non-negative, got {self.count}")
        if not 0 < self.scale <= 1:
            raise ValueError(f"speed scale must lie in (0, 1], got {self.scale}")
        if isinstance(self.grid, GridSpec):
            self.grid = self.grid.to_dict()
        self.layer_coverage = tuple(self.layer_coverage)

    @property
    def grid_spec(self) -> GridSpec:
        return GridSpec.from_dict(self.grid)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["layer_coverage"] = list(self.layer_coverage)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **changes) -> "ScenarioConfig":
        d = self.to_dict()
        d.update(changes)
        return ScenarioConfig.from_dict(d)


def load_scenario(path) -> ScenarioConfig:
    with open(path) as fh:
        return ScenarioConfig.from_dict(json.load(fh))


@dataclass
class Environment:
    """Everything a planner needs besides the flight plans themselves."""

    grid: GridSpec
    fleet: dict[str, AircraftPerformance]
    building_blocks: set = field(default_factory=set)
    scale: float = 0.6
    hover_threshold: float = DEFAULT_HOVER_THRESHOLD
    landing_hold: float | None = None
    ground_hold: float = 0.0
    footprints: list = field(default_factory=list)

    def __post_init__(self):
        self._base = OccupancyLedger(self.grid)
        self._base.add_buildings(sorted(self.building_blocks))

    def fresh_ledger(self) -> OccupancyLedger:
        return self._base.copy()

    @property
    def static(self) -> bytearray:
        return self._base.static

    def free_blocks(self) -> list[BlockIndex]:
        return [self.grid.unflat(n) for n, flag in enumerate(self._base.static) if not flag]


# -- synthetic buildings ------------------------------------------------------


def _rect_polygon(cx, cy, w, d, angle):
    c, s = math.cos(angle), math.sin(angle)
    pts = []
    for ux, uy in ((-w / 2, -d / 2), (w / 2, -d / 2), (w / 2, d / 2), (-w / 2, d / 2)):
        pts.append((cx + c * ux - s * uy, cy + s * ux + c * uy))
    return tuple(pts)


def synthetic_buildings(grid: GridSpec, rng: np.random.Generator,
                        layer_coverage=REFERENCE_LAYER_COVERAGE) -> list[BuildingFootprint]:
    """Random rectangular blocks of buildings matching per-layer coverage.

    Footprints are placed until the ground layer reaches its target share;
    heights are then handed out so that the tall and very tall buildings
    cover roughly the target shares of the upper layers.
    """
    from .occupancy import footprint_cells

    n_cells = grid.I * grid.J
    targets = [c * n_cells for c in layer_coverage]
    width, depth = grid.I * grid.a, grid.J * grid.a
    shapes = []
    covered: set = set()
    while len(covered) < targets[0] and len(shapes) < 20 * n_cells:
        w = rng.uniform(1.0, 5.0) * grid.a
        d = rng.uniform(1.0, 5.0) * grid.a
        angle = 0.0 if rng.random() < 0.6 else rng.uniform(0.0, math.pi / 2)
        cx, cy = rng.uniform(0.0, width), rng.uniform(0.0, depth)
        poly = tuple((grid.origin[0] + x, grid.origin[1] + y)
                     for x, y in _rect_polygon(cx, cy, w, d, angle))
        fp = BuildingFootprint(poly, 1.0)
        cells = set(footprint_cells(fp, grid))
        if not cells:
            continue
        shapes.append((poly, cells))
        covered |= cells

    h = grid.h
    order = rng.permutation(len(shapes))
    heights = [0.0] * len(shapes)
    reached = [set() for _ in layer_coverage]
    for n in order:
        poly, cells = shapes[n]
        tier = 0
        for layer in range(len(layer_coverage) - 1, 0, -1):
            if layer < grid.K and len(reached[layer] | cells) <= targets[layer] * 1.02:
                tier = layer
                break
        for layer in range(tier + 1):
            reached[layer] |= cells
        heights[n] = rng.uniform(tier * h + 0.1 * h, (tier + 1) * h)
    return [BuildingFootprint(poly, round(float(z), 3)) for (poly, _), z in zip(shapes, heights)]


# -- environment / scenario ---------------------------------------------------


def build_environment(cfg: ScenarioConfig) -> Environment:
    grid = cfg.grid_spec
    fleet = load_fleet(cfg.fleet) if cfg.fleet else default_fleet()
    if cfg.aircraft:
        missing = [a for a in cfg.aircraft if a not in fleet]
        if missing:
            raise ValueError(f"aircraft not in fleet: {missing}")
        fleet = {name: fleet[name] for name in cfg.aircraft}
    if cfg.buildings == "synthetic":
        footprints = synthetic_buildings(grid, np.random.default_rng([cfg.seed, 1]),
                                         cfg.layer_coverage)
    elif cfg.buildings:
        footprints = load_buildings(cfg.buildings)
    else:
        footprints = []
    return Environment(grid=grid, fleet=fleet,
                       building_blocks=rasterize_buildings(footprints, grid),
                       scale=cfg.scale, hover_threshold=cfg.hover_threshold,
                       landing_hold=cfg.landing_hold, ground_hold=cfg.ground_hold,
                       footprints=footprints)


def generate_scenario(cfg: ScenarioConfig, env: Environment | None = None) -> list[FlightPlan]:
    """Seeded random flight plans, listed in departure order.

    Departure times are drawn as fractions of the window, so configs that
    differ only in ``window`` yield the same OD pairs and aircraft with
    proportionally stretched departure times.
    """
    if env is None:
        env = build_environment(cfg)
    if cfg.count == 0:
        return []
    free = env.free_blocks()
    if len(free) < 2:
        raise InfeasibleScenario(f"only {len(free)} building-free blocks; need at least 2")
    rng = np.random.default_rng([cfg.seed, 2])
    names = list(env.fleet)
    raw = []
    for _ in range(cfg.count):
        o = int(rng.integers(len(free)))
        d = int(rng.integers(len(free) - 1))
        if d >= o:
            d += 1
        u = float(rng.random())
        craft = names[int(rng.integers(len(names)))]
        raw.append((u, free[o], free[d], craft))
    raw.sort(key=lambda r: r[0])
    width = max(4, len(str(cfg.count - 1)))
    return [
        FlightPlan(id=f"F{n:0{width}d}", origin=center(o, env.grid), destination=center(d, env.grid),
                   t_dep=u * float(cfg.window), aircraft=craft)
        for n, (u, o, d, craft) in enumerate(raw)
    ]


# -- planning -----------------------------------------------------------------


@dataclass(frozen=True)
class PlanFailure:
    id: str
    error: str
    message: str


def _endpoints(plan: FlightPlan, env: Environment):
    return block_of_point(plan.origin, env.grid), block_of_point(plan.destination, env.grid)


def _perf(plan: FlightPlan, env: Environment) -> AircraftPerformance:
    try:
        return env.fleet[plan.aircraft]
    except KeyError:
        raise PlanningError(f"aircraft {plan.aircraft!r} not in fleet") from None


def plan_fcfs(plans, env: Environment, ledger: OccupancyLedger | None = None,
              timings: list | None = None):
    """Plan and reserve each flight in list order against all earlier ones.

    Returns ``(trajectories, failures)``; a failed flight is recorded and
    skipped.  ``ledger`` defaults to a fresh one holding only buildings and
    is updated in place.  Per-flight wall-clock seconds are appended to
    ``timings`` when given.
    """
    if ledger is None:
        ledger = env.fresh_ledger()
    trajs, failures = [], []
    for plan in plans:
        tic = time.perf_counter()
        try:
            start, goal = _endpoints(plan, env)
            traj = cfa_star(env.grid, ledger, start, goal, _perf(plan, env), env.scale,
                            plan.t_dep, env.hover_threshold, env.landing_hold, env.ground_hold,
                            flight_id=plan.id, aircraft=plan.aircraft)
            reserve_trajectory(ledger, traj)
            trajs.append(traj)
        except (PlanningError, ValueError) as exc:
            failures.append(PlanFailure(plan.id, type(exc).__name__, str(exc)))
        if timings is not None:
            timings.append(time.perf_counter() - tic)
    return trajs, failures


def _baseline_one(args):
    plan, env = args
    try:
        start, goal = _endpoints(plan, env)
        return astar_trajectory(env.grid, env.static, start, goal, _perf(plan, env), env.scale,
                                plan.t_dep, flight_id=plan.id, aircraft=plan.aircraft,
                                landing_hold=env.landing_hold)
    except (PlanningError, ValueError) as exc:
        return PlanFailure(plan.id, type(exc).__name__, str(exc))


def plan_baseline(plans, env: Environment, jobs: int = 1, timings: list | None = None):
    """Independent A* per flight, buildings only; returns ``(trajectories, failures)``."""
    plans = list(plans)
    if jobs > 1 and len(plans) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_baseline_one, [(p, env) for p in plans], chunksize=8))
    else:
        results = []
        for p in plans:
            tic = time.perf_counter()
            results.append(_baseline_one((p, env)))
            if timings is not None:
                timings.append(time.perf_counter() - tic)
    trajs = [r for r in results if not isinstance(r, PlanFailure)]
    failures = [r for r in results if isinstance(r, PlanFailure)]
    return trajs, failures
