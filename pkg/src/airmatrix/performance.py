"""Quasi-static point-mass speed model for multirotor aircraft.

At constant velocity along a straight line with elevation ``phi`` the
propulsive power balances drag ``e * v**2`` and the climb rate against
gravity::

    P(v, phi) = e * v**3 + m * g * v * sin(phi)

Calibrating at ``phi = 0`` (max horizontal speed) and ``phi = pi/2`` (max
vertical speed) fixes both the drag factor ``e`` and ``P_max``.  Descents
are flown at the climb speed of the same angle, so only ``|phi|`` matters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .exceptions import DegenerateSpeeds, InvalidScale
from .grid import GridSpec, LinkClass

G = 9.81

_MAX_BISECTIONS = 200


@dataclass(frozen=True)
class AircraftPerformance:
    name: str
    m: float
    v_mv: float
    v_mh: float
    e: float
    P_max: float
    g: float = G

    def to_dict(self) -> dict:
        return {"m": self.m, "v_mv": self.v_mv, "v_mh": self.v_mh}


def calibrate(m: float, v_mv: float, v_mh: float, name: str = "") -> AircraftPerformance:
    if not m > 0:
        raise ValueError(f"mass must be positive, got {m}")
    if not v_mv > 0:
        raise DegenerateSpeeds(f"max vertical speed must be positive, got {v_mv}")
    if not v_mh > v_mv:
        raise DegenerateSpeeds(
            f"max horizontal speed ({v_mh}) must exceed max vertical speed ({v_mv})"
        )
    e = m * G * v_mv / (v_mh**3 - v_mv**3)
    return AircraftPerformance(name=name, m=float(m), v_mv=float(v_mv), v_mh=float(v_mh),
                               e=e, P_max=e * v_mh**3)


def max_speed_at_angle(perf: AircraftPerformance, phi: float) -> float:
    """Largest sustainable speed along a straight path at elevation ``phi``.

    The power balance is strictly increasing in ``v``, so the root in
    ``[v_mv, v_mh]`` is unique; it is located by bisection.
    """
    if not -math.pi / 2 - 1e-12 <= phi <= math.pi / 2 + 1e-12:
        raise ValueError(f"elevation angle {phi} outside [-pi/2, pi/2]")
    s = min(abs(math.sin(phi)), 1.0)
    if s == 0.0:
        return perf.v_mh
    if s == 1.0:
        return perf.v_mv

    climb = perf.m * perf.g * s

    def residual(v):
        return perf.e * v**3 + climb * v - perf.P_max

    lo, hi = perf.v_mv, perf.v_mh
    mid = 0.5 * (lo + hi)
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        r = residual(mid)
        # run to bracket collapse; far tighter than the residual tolerance
        # and makes the speed independent of the root finder used
        if r == 0.0 or hi - lo <= 4 * math.ulp(hi):
            break
        if r > 0:
            hi = mid
        else:
            lo = mid
    return mid


def _check_scale(scale: float) -> None:
    if not 0.0 < scale <= 1.0:
        raise InvalidScale(f"speed scale must lie in (0, 1], got {scale}")


def link_speed(perf: AircraftPerformance, c: LinkClass, scale: float = 1.0) -> float:
    _check_scale(scale)
    return scale * max_speed_at_angle(perf, c.elevation)


def link_time(perf: AircraftPerformance, c: LinkClass, g: GridSpec | None = None,
              scale: float = 1.0) -> float:
    # c.length already encodes the grid geometry; g is accepted for symmetry
    # with the other per-grid helpers.
    return c.length / link_speed(perf, c, scale)


# name -> (mass kg, max vertical m/s, max horizontal m/s)
DEFAULT_FLEET_SPECS: dict[str, tuple[float, float, float]] = {
    "DJI Mavic Air": (0.43, 4.0, 19.0),
    "Self-Built Drone": (0.3, 4.0, 12.0),
    "DJI Phantom 4": (1.375, 3.0, 20.0),
    "DJI Matrice 600 Pro": (10.0, 5.0, 18.0),
}


def default_fleet() -> dict[str, AircraftPerformance]:
    return {name: calibrate(*spec, name=name) for name, spec in DEFAULT_FLEET_SPECS.items()}


def fleet_from_dict(d: dict) -> dict[str, AircraftPerformance]:
    fleet = {}
    for name, spec in d.items():
        fleet[name] = calibrate(float(spec["m"]), float(spec["v_mv"]), float(spec["v_mh"]),
                                name=name)
    return fleet


def load_fleet(path) -> dict[str, AircraftPerformance]:
    with open(path) as fh:
        return fleet_from_dict(json.load(fh))


def fleet_to_dict(fleet: dict[str, AircraftPerformance]) -> dict:
    return {name: perf.to_dict() for name, perf in fleet.items()}
