"""Shortest-flight-time search over the AirMatrix graph.

``astar`` plans against buildings only.  ``cfa_star`` additionally plans
against an :class:`~airmatrix.occupancy.OccupancyLedger` of earlier flights:
each time a neighbour's block is taken during the arrival window it either
hovers at the current block until the neighbour frees up (if the wait is
short enough and the extended stay is itself conflict-free) or drops that
neighbour, leaving the open list to find a detour.  As in plain A*, a block
that has been expanded is never revisited, so the search is greedy in time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from heapq import heappop, heappush

from .exceptions import (
    BlockedEndpoint,
    ConflictError,
    DepartureConflict,
    NoPathFound,
    NotAdjacent,
)
from .grid import OFFSETS, BlockIndex, GridSpec, LinkKind, link_class, link_of_offset
from .occupancy import OccupancyLedger
from .performance import AircraftPerformance, link_time
from .trajectory import BlockVisit, Trajectory4D

INF = float("inf")
DEFAULT_HOVER_THRESHOLD = 60.0


@dataclass(frozen=True)
class TimeTable:
    """Single-step flight times (s) along the seven move directions."""

    t_x00: float
    t_0y0: float
    t_00z: float
    t_xy0: float
    t_x0z: float
    t_0yz: float
    t_xyz: float

    @classmethod
    def build(cls, perf: AircraftPerformance, grid: GridSpec, scale: float = 1.0) -> "TimeTable":
        def t(kind, sign=0):
            return link_time(perf, link_class(kind, sign, grid), grid, scale)

        axis = t(LinkKind.AXIS_H)
        face = t(LinkKind.FACE_DIAG, 1)
        return cls(axis, axis, t(LinkKind.VERT, 1), t(LinkKind.DIAG_H), face, face,
                   t(LinkKind.CORNER_DIAG, 1))


def heuristic_2d(dx: int, dy: int, tt: TimeTable) -> float:
    if dx >= dy:
        return dy * tt.t_xy0 + (dx - dy) * tt.t_x00
    return dx * tt.t_xy0 + (dy - dx) * tt.t_0y0


def _lead_axis(p: int, q: int, r: int, t_p: float, t_pq: float, t_pr: float,
               t_all: float) -> float:
    # p moves along the lead axis; q and r steps of the other two axes ride
    # on them. n moves carry both, and the cost is linear in n, so the
    # optimum sits at one end of the feasible range.
    def cost(n):
        return n * t_all + (q - n) * t_pq + (r - n) * t_pr + (p - q - r + n) * t_p

    hi = r
    lo = max(0, q + r - p)
    return cost(hi) if hi == lo else min(cost(hi), cost(lo))


def heuristic_3d(dx: int, dy: int, dz: int, tt: TimeTable) -> float:
    """Obstacle-free optimal flight time for a block displacement ``|delta|``.

    Branches on the largest component as in the classic construction: full
    diagonals for the smallest component, two-axis diagonals in the plane
    of the two largest, single-axis moves for the rest.  When the vertical
    axis leads, two face diagonals can beat one corner diagonal plus a
    vertical step (``2 t_x0z < t_xyz + t_00z`` holds for typical
    multirotors), so the cheaper end of the allocation is taken.
    """
    if dx >= dy >= dz:
        return _lead_axis(dx, dy, dz, tt.t_x00, tt.t_xy0, tt.t_x0z, tt.t_xyz)
    if dx >= dz >= dy:
        return _lead_axis(dx, dz, dy, tt.t_x00, tt.t_x0z, tt.t_xy0, tt.t_xyz)
    if dy >= dx >= dz:
        return _lead_axis(dy, dx, dz, tt.t_0y0, tt.t_xy0, tt.t_0yz, tt.t_xyz)
    if dy >= dz >= dx:
        return _lead_axis(dy, dz, dx, tt.t_0y0, tt.t_0yz, tt.t_xy0, tt.t_xyz)
    if dz >= dx >= dy:
        return _lead_axis(dz, dx, dy, tt.t_00z, tt.t_x0z, tt.t_0yz, tt.t_xyz)
    return _lead_axis(dz, dy, dx, tt.t_00z, tt.t_0yz, tt.t_x0z, tt.t_xyz)


class SearchSpace:
    """Per (grid, aircraft, scale) precomputation: step offsets and link times."""

    def __init__(self, grid: GridSpec, perf: AircraftPerformance, scale: float):
        self.grid = grid
        self.perf = perf
        self.scale = scale
        self.tt = TimeTable.build(perf, grid, scale)
        stride_j, stride_k = grid.I, grid.I * grid.J
        self.steps = []
        for off in OFFSETS:
            di, dj, dk = off
            c = link_of_offset(off, grid)
            self.steps.append((di, dj, dk, di + dj * stride_j + dk * stride_k,
                               link_time(perf, c, grid, scale)))
        self.min_link_time = min(s[4] for s in self.steps)


@lru_cache(maxsize=256)
def search_space(grid: GridSpec, perf: AircraftPerformance, scale: float) -> SearchSpace:
    return SearchSpace(grid, perf, scale)


def _static_mask(grid: GridSpec, obstacles) -> bytearray:
    if obstacles is None:
        return bytearray(grid.n_blocks)
    if isinstance(obstacles, OccupancyLedger):
        return obstacles.static
    if isinstance(obstacles, (bytes, bytearray)):
        return obstacles
    mask = bytearray(grid.n_blocks)
    for b in obstacles:
        mask[grid.flat(b)] = 1
    return mask


def _run(space: SearchSpace, blocked, start: int, goal: int, t_dep: float,
         ledger: OccupancyLedger | None, hover_threshold: float,
         landing_hold: float | None):
    """Core A* loop.  Returns ``(parent, enter, arrive, wait)`` dicts keyed by flat id.

    ``enter[n]`` is the absolute time the aircraft crosses into block ``n``,
    ``arrive[n]`` the time it reaches the block centre and ``wait[n]`` the
    hover spent in the parent block before moving on to ``n``.
    """
    grid = space.grid
    I, J, K = grid.I, grid.J, grid.K
    IJ = I * J
    tt = space.tt
    steps = space.steps
    half_min = 0.5 * space.min_link_time

    grest, gi = divmod(goal, I)
    gk, gj = divmod(grest, J)
    hcache: dict[int, float] = {}

    def heur(n):
        h = hcache.get(n)
        if h is None:
            rest, i = divmod(n, I)
            k, j = divmod(rest, J)
            h = heuristic_3d(abs(i - gi), abs(j - gj), abs(k - gk), tt)
            hcache[n] = h
        return h

    parent = {start: -1}
    enter = {start: t_dep}
    arrive = {start: t_dep}
    wait = {start: 0.0}
    closed = bytearray(grid.n_blocks)
    h0 = heur(start)
    heap = [(h0, h0, start, 0, t_dep)]
    seq = 1
    if ledger is not None:
        free = ledger._free
        earliest = ledger._earliest
    while heap:
        _, _, cur, _, t_cur = heappop(heap)
        if closed[cur] or arrive[cur] != t_cur:
            continue
        closed[cur] = 1
        if cur == goal:
            return parent, enter, arrive, wait
        rest, ci = divmod(cur, I)
        ck, cj = divmod(rest, J)
        for di, dj, dk, dflat, L in steps:
            ni = ci + di
            if ni < 0 or ni >= I:
                continue
            nj = cj + dj
            if nj < 0 or nj >= J:
                continue
            nk = ck + dk
            if nk < 0 or nk >= K:
                continue
            nb = cur + dflat
            if closed[nb] or blocked[nb]:
                continue
            half = 0.5 * L
            t_in = t_cur + half
            hover = 0.0
            if ledger is not None:
                if nb == goal:
                    need = INF if landing_hold is None else half + landing_hold
                else:
                    need = half + half_min
                t_ok = earliest(nb, t_in, need)
                if t_ok - t_in > hover_threshold:
                    continue
                # the wait happens in the current block, which must stay free
                if not free(cur, t_cur, t_ok):
                    continue
                hover = t_ok - t_in
                t_in = t_ok
            t_n = t_in + half
            old = arrive.get(nb)
            if old is not None and old <= t_n:
                continue
            arrive[nb] = t_n
            enter[nb] = t_in
            parent[nb] = cur
            wait[nb] = hover
            hn = heur(nb)
            heappush(heap, (t_n - t_dep + hn, hn, nb, seq, t_n))
            seq += 1
    return None


def _trajectory(space: SearchSpace, records, start: int, goal: int, t_dep: float,
                flight_id: str, aircraft: str, planner: str,
                landing_hold: float | None) -> Trajectory4D:
    parent, enter, arrive, wait = records
    grid = space.grid
    chain = [goal]
    while chain[-1] != start:
        chain.append(parent[chain[-1]])
    chain.reverse()
    visits = []
    segments = []
    for n, bid in enumerate(chain):
        t_in = enter[bid]
        if n + 1 < len(chain):
            nxt = chain[n + 1]
            t_out = enter[nxt]
            hover = wait[nxt]
            segments.append(_link_time_between(space, bid, nxt))
            segments.append(hover)
        else:
            t_out = arrive[bid]
            hover = 0.0
        visits.append(BlockVisit(grid.unflat(bid), t_in, t_out, hover))
    return Trajectory4D(flight_id=flight_id, visits=visits, flight_time=math.fsum(segments),
                        aircraft=aircraft, planner=planner, landing_hold=landing_hold)


def _link_time_between(space: SearchSpace, a: int, b: int) -> float:
    grid = space.grid
    pa, pb = grid.unflat(a), grid.unflat(b)
    off = (pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2])
    return space.steps[OFFSETS.index(off)][4]


def _endpoints(grid: GridSpec, blocked, start, goal) -> tuple[int, int]:
    for name, b in (("start", start), ("goal", goal)):
        if not grid.contains(b):
            raise IndexError(f"{name} block {tuple(b)} outside grid {grid.shape}")
    s, g = grid.flat(start), grid.flat(goal)
    if blocked[s]:
        raise BlockedEndpoint(f"start block {tuple(start)} is inside a building")
    if blocked[g]:
        raise BlockedEndpoint(f"goal block {tuple(goal)} is inside a building")
    return s, g


def astar_trajectory(grid: GridSpec, static_obstacles, start, goal, perf: AircraftPerformance,
                     scale: float = 1.0, t_dep: float = 0.0, flight_id: str = "",
                     aircraft: str = "", landing_hold: float | None = None) -> Trajectory4D:
    """Minimum-flight-time trajectory ignoring every dynamic obstacle."""
    space = search_space(grid, perf, scale)
    blocked = _static_mask(grid, static_obstacles)
    s, g = _endpoints(grid, blocked, start, goal)
    records = _run(space, blocked, s, g, float(t_dep), None, INF, landing_hold)
    if records is None:
        raise NoPathFound(f"goal {tuple(goal)} unreachable from {tuple(start)}")
    return _trajectory(space, records, s, g, float(t_dep), flight_id, aircraft or perf.name,
                       "astar", landing_hold)


def astar(grid: GridSpec, static_obstacles, start, goal, perf: AircraftPerformance,
          scale: float = 1.0) -> list[BlockIndex]:
    return astar_trajectory(grid, static_obstacles, start, goal, perf, scale).blocks


def cfa_star(grid: GridSpec, ledger: OccupancyLedger, start, goal, perf: AircraftPerformance,
             scale: float = 1.0, t_dep: float = 0.0,
             hover_threshold: float = DEFAULT_HOVER_THRESHOLD,
             landing_hold: float | None = None, ground_hold: float = 0.0,
             flight_id: str = "", aircraft: str = "") -> Trajectory4D:
    """Conflict-free trajectory against ``ledger``; the ledger is not modified.

    ``landing_hold`` is how long the landing block stays reserved after
    arrival (``None``: forever).  With ``ground_hold > 0`` a flight whose
    departure block is taken at ``t_dep`` waits on the ground for up to that
    many seconds; the returned trajectory then starts at the later time and
    records the wait in ``meta["ground_hold"]``.
    """
    space = search_space(grid, perf, scale)
    blocked = ledger.static
    s, g = _endpoints(grid, blocked, start, goal)
    t0 = float(t_dep)
    if ledger._owner_at(s, t0) is not None:
        if ground_hold > 0:
            t_free = ledger._earliest(s, t0, space.min_link_time)
            if t_free - t0 <= ground_hold:
                traj = cfa_star(grid, ledger, start, goal, perf, scale, t_free, hover_threshold,
                                landing_hold, 0.0, flight_id, aircraft)
                traj.meta["ground_hold"] = t_free - t0
                return traj
        raise DepartureConflict(
            f"start block {tuple(start)} is held by {ledger._owner_at(s, t0)!r} at t={t0}"
        )
    if s == g:
        hold_end = INF if landing_hold is None else t0 + landing_hold
        if not ledger._free(s, t0, hold_end):
            raise NoPathFound(f"block {tuple(start)} cannot be held from t={t0}")
    records = _run(space, blocked, s, g, t0, ledger, float(hover_threshold), landing_hold)
    if records is None:
        raise NoPathFound(f"no conflict-free path from {tuple(start)} to {tuple(goal)}")
    return _trajectory(space, records, s, g, t0, flight_id, aircraft or perf.name, "cfastar",
                       landing_hold)


def annotate_times(path, hover, perf: AircraftPerformance, grid: GridSpec, scale: float = 1.0,
                   t_dep: float = 0.0, flight_id: str = "", aircraft: str = "",
                   planner: str = "astar", landing_hold: float | None = None) -> Trajectory4D:
    """Enter/exit times of a block path.

    Each block is held for half of its incoming link time, half of its
    outgoing link time and its own hover; the next block is entered when the
    previous one is left.  ``hover`` is a sequence aligned with ``path`` or a
    mapping from position to seconds.
    """
    path = [BlockIndex(*b) for b in path]
    if not path:
        raise ValueError("empty path")
    if isinstance(hover, dict):
        hovers = [float(hover.get(n, 0.0)) for n in range(len(path))]
    elif hover is None:
        hovers = [0.0] * len(path)
    else:
        hovers = [float(x) for x in hover]
        if len(hovers) != len(path):
            raise ValueError("hover must align with path")
    links = []
    for a, b in zip(path, path[1:]):
        off = (b.i - a.i, b.j - a.j, b.k - a.k)
        if off not in OFFSETS or not grid.contains(a) or not grid.contains(b):
            raise NotAdjacent(f"{tuple(a)} and {tuple(b)} are not grid neighbours")
        links.append(link_time(perf, link_of_offset(off, grid), grid, scale))
    visits = []
    t = float(t_dep)
    for n, blk in enumerate(path):
        cost = hovers[n]
        if n > 0:
            cost += 0.5 * links[n - 1]
        if n < len(links):
            cost += 0.5 * links[n]
        visits.append(BlockVisit(blk, t, t + cost, hovers[n]))
        t += cost
    return Trajectory4D(flight_id=flight_id, visits=visits,
                        flight_time=math.fsum(links + hovers), aircraft=aircraft or perf.name,
                        planner=planner, landing_hold=landing_hold)


def reserve_trajectory(ledger: OccupancyLedger, traj: Trajectory4D, owner=None) -> None:
    """Reserve every interval of ``traj`` or nothing at all."""
    owner = traj.flight_id if owner is None else owner
    grid = ledger.grid
    pending = []
    for block, start, end in traj.reservations():
        bid = grid.flat(block)
        blocking = ledger._blocker(bid, start, end)
        if blocking is not None:
            raise ConflictError(block, blocking)
        if end > start:
            pending.append((bid, start, end))
    # a simple path never repeats a block, so pending entries cannot clash
    for bid, start, end in pending:
        ledger._insert(bid, start, end, owner)
