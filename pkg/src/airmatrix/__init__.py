"""Conflict-free four-dimensional path planning over an AirMatrix airspace grid."""

__version__ = "0.1.0"

from .batch import (
    Environment,
    FlightPlan,
    ScenarioConfig,
    build_environment,
    generate_scenario,
    plan_baseline,
    plan_fcfs,
)
from .estimator import AStarPlanner, CFAStarPlanner
from .grid import BlockIndex, GridSpec, block_of_point, center, link_table, neighbors
from .occupancy import (
    BuildingFootprint,
    OccupancyLedger,
    TimeInterval,
    duplicate_occupancy_time,
    rasterize_buildings,
)
from .performance import (
    AircraftPerformance,
    calibrate,
    default_fleet,
    link_speed,
    link_time,
    max_speed_at_angle,
)
from .reporting import conflict_curve, delay_report, density_sweep, heatmap
from .search import (
    TimeTable,
    annotate_times,
    astar,
    astar_trajectory,
    cfa_star,
    heuristic_2d,
    heuristic_3d,
    reserve_trajectory,
)
from .trajectory import BlockVisit, Trajectory4D

__all__ = [
    "AStarPlanner", "AircraftPerformance", "BlockIndex", "BlockVisit", "BuildingFootprint",
    "CFAStarPlanner", "Environment", "FlightPlan", "GridSpec", "OccupancyLedger",
    "ScenarioConfig", "TimeInterval", "TimeTable", "Trajectory4D", "annotate_times", "astar",
    "astar_trajectory", "block_of_point", "build_environment", "calibrate", "center",
    "cfa_star", "conflict_curve", "default_fleet", "delay_report", "density_sweep",
    "duplicate_occupancy_time", "generate_scenario", "heatmap", "heuristic_2d", "heuristic_3d",
    "link_speed", "link_table", "link_time", "max_speed_at_angle", "neighbors", "plan_baseline",
    "plan_fcfs", "rasterize_buildings", "reserve_trajectory",
]
