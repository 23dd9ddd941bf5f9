"""scikit-learn style front end for the planners.

``fit`` prepares the airspace (grid, calibrated fleet, rasterised buildings)
and ``predict`` turns flight plans into trajectories, so planners can be
configured with ``get_params``/``set_params``, cloned and swept like any
other estimator.
"""

from __future__ import annotations

from numbers import Real

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .batch import Environment, FlightPlan, plan_baseline, plan_fcfs
from .grid import GridSpec
from .occupancy import BuildingFootprint, buildings_from_list, rasterize_buildings
from .performance import AircraftPerformance, calibrate, default_fleet
from .search import DEFAULT_HOVER_THRESHOLD, reserve_trajectory


def check_grid(grid) -> GridSpec:
    if grid is None:
        return GridSpec()
    if isinstance(grid, GridSpec):
        return grid
    if isinstance(grid, dict):
        return GridSpec.from_dict(grid)
    raise TypeError(f"grid must be a GridSpec or dict, got {type(grid).__name__}")


def check_fleet(fleet) -> dict[str, AircraftPerformance]:
    """Calibrated fleet from ``None``, performance records, dicts or ``(m, v_mv, v_mh)``."""
    if fleet is None:
        return default_fleet()
    out = {}
    for name, spec in dict(fleet).items():
        if isinstance(spec, AircraftPerformance):
            out[name] = spec
        elif isinstance(spec, dict):
            out[name] = calibrate(float(spec["m"]), float(spec["v_mv"]), float(spec["v_mh"]),
                                  name=name)
        else:
            m, v_mv, v_mh = spec
            out[name] = calibrate(float(m), float(v_mv), float(v_mh), name=name)
    if not out:
        raise ValueError("fleet is empty")
    return out


def check_buildings(buildings) -> list[BuildingFootprint]:
    if buildings is None:
        return []
    items = list(buildings)
    if all(isinstance(b, BuildingFootprint) for b in items):
        return items
    return buildings_from_list(items)


def check_flight_plans(X, fleet=None) -> list[FlightPlan]:
    """Normalise plans given as ``FlightPlan``s, row dicts, a DataFrame or an array.

    Arrays are ``(n, 7)`` numeric rows ``ox, oy, oz, dx, dy, dz, t_dep``
    (every flight then uses the first fleet aircraft) or ``(n, 8)`` object
    rows with the aircraft name last.  Ids default to the row number.
    """
    if hasattr(X, "to_dict") and hasattr(X, "columns"):
        X = X.to_dict(orient="records")
    if isinstance(X, np.ndarray) or (
        isinstance(X, (list, tuple)) and X and isinstance(X[0], (list, tuple, np.ndarray))
    ):
        arr = np.asarray(X, dtype=object)
        if arr.ndim != 2 or arr.shape[1] not in (7, 8):
            raise ValueError(f"expected an (n, 7) or (n, 8) array of plans, got shape {arr.shape}")
        default_craft = next(iter(fleet)) if fleet else ""
        plans = []
        for n, row in enumerate(arr):
            nums = [float(x) for x in row[:7]]
            craft = str(row[7]) if arr.shape[1] == 8 else default_craft
            plans.append(FlightPlan(str(n), tuple(nums[0:3]), tuple(nums[3:6]), nums[6], craft))
    else:
        plans = []
        for n, p in enumerate(X):
            if isinstance(p, FlightPlan):
                plans.append(p)
            elif isinstance(p, dict):
                row = dict(p)
                row.setdefault("id", str(n))
                plans.append(FlightPlan.from_row(row))
            else:
                raise TypeError(f"cannot interpret flight plan {p!r}")
    seen = set()
    for p in plans:
        if p.id in seen:
            raise ValueError(f"duplicate flight id {p.id!r}")
        seen.add(p.id)
        if not (isinstance(p.t_dep, Real) and p.t_dep >= 0):
            raise ValueError(f"flight {p.id}: departure time must be >= 0, got {p.t_dep}")
        if fleet is not None and p.aircraft not in fleet:
            raise ValueError(f"flight {p.id}: aircraft {p.aircraft!r} not in fleet")
    return plans


class AStarPlanner(BaseEstimator):
    """Independent minimum-flight-time A* for each flight, buildings only.

    Parameters
    ----------
    grid : GridSpec or dict, optional
        Airspace geometry; defaults to 100 x 100 x 3 blocks of 20 x 20 x 40 m.
    fleet : dict, optional
        Aircraft name to ``(m, v_mv, v_mh)``, a dict with those keys, or a
        calibrated ``AircraftPerformance``. Defaults to the four built-in types.
    buildings : list, optional
        ``BuildingFootprint`` objects or ``{"polygon", "height"}`` dicts.
    scale : float, default=0.6
        Fraction of the maximum speed used for planning.
    landing_hold : float or None, default=None
        Seconds the landing block stays reserved; ``None`` holds it forever.
    n_jobs : int, default=1
        Worker processes used to plan flights in parallel.

    Attributes
    ----------
    env_ : Environment
    building_blocks_ : set of BlockIndex
    failures_ : list of PlanFailure
        Flights the last ``predict`` call could not route.
    """

    def __init__(self, grid=None, fleet=None, buildings=None, scale=0.6, landing_hold=None,
                 n_jobs=1):
        self.grid = grid
        self.fleet = fleet
        self.buildings = buildings
        self.scale = scale
        self.landing_hold = landing_hold
        self.n_jobs = n_jobs

    def _environment(self) -> Environment:
        if not (isinstance(self.scale, Real) and 0 < self.scale <= 1):
            raise ValueError(f"scale must lie in (0, 1], got {self.scale!r}")
        grid = check_grid(self.grid)
        footprints = check_buildings(self.buildings)
        return Environment(grid=grid, fleet=check_fleet(self.fleet),
                           building_blocks=rasterize_buildings(footprints, grid),
                           scale=float(self.scale), landing_hold=self.landing_hold,
                           footprints=footprints)

    def fit(self, X=None, y=None):
        """Prepare the airspace. ``X`` is ignored and only accepted for API symmetry."""
        self.env_ = self._environment()
        self.building_blocks_ = set(self.env_.building_blocks)
        return self

    def predict(self, X):
        check_is_fitted(self, "env_")
        plans = check_flight_plans(X, self.env_.fleet)
        trajs, self.failures_ = plan_baseline(plans, self.env_, jobs=self.n_jobs)
        return trajs

    def fit_predict(self, X, y=None):
        return self.fit(X).predict(X)


class CFAStarPlanner(AStarPlanner):
    """First-come-first-served conflict-free planner.

    Flights are planned in the order given, each against every flight planned
    before it.  ``predict`` starts from the airspace as fitted and leaves it
    untouched; ``partial_fit`` commits the new trajectories so that later
    calls plan around them.

    Parameters
    ----------
    hover_threshold : float, default=60.0
        Longest wait (s) the planner will accept in front of a taken block.
    ground_hold : float, default=0.0
        Longest departure delay (s) when the take-off block is taken; ``0``
        turns such flights into failures.

    Attributes
    ----------
    ledger_ : OccupancyLedger
        Buildings plus all trajectories committed by ``partial_fit``.
    """

    def __init__(self, grid=None, fleet=None, buildings=None, scale=0.6, landing_hold=None,
                 hover_threshold=DEFAULT_HOVER_THRESHOLD, ground_hold=0.0, n_jobs=1):
        super().__init__(grid=grid, fleet=fleet, buildings=buildings, scale=scale,
                         landing_hold=landing_hold, n_jobs=n_jobs)
        self.hover_threshold = hover_threshold
        self.ground_hold = ground_hold

    def _environment(self) -> Environment:
        env = super()._environment()
        if not self.hover_threshold >= 0:
            raise ValueError(f"hover_threshold must be >= 0, got {self.hover_threshold!r}")
        env.hover_threshold = float(self.hover_threshold)
        env.ground_hold = float(self.ground_hold)
        return env

    def fit(self, X=None, y=None):
        super().fit(X, y)
        self.ledger_ = self.env_.fresh_ledger()
        self.trajectories_ = []
        return self

    def predict(self, X):
        check_is_fitted(self, "ledger_")
        plans = check_flight_plans(X, self.env_.fleet)
        trajs, self.failures_ = plan_fcfs(plans, self.env_, ledger=self.ledger_.copy())
        return trajs

    def partial_fit(self, X, y=None):
        if not hasattr(self, "ledger_"):
            self.fit()
        plans = check_flight_plans(X, self.env_.fleet)
        trajs, self.failures_ = plan_fcfs(plans, self.env_, ledger=self.ledger_)
        self.trajectories_.extend(trajs)
        return self

    def commit(self, trajectories):
        """Reserve externally planned trajectories in the fitted airspace."""
        check_is_fitted(self, "ledger_")
        for t in trajectories:
            reserve_trajectory(self.ledger_, t)
            self.trajectories_.append(t)
        return self
