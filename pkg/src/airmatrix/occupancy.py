"""4D occupancy ledger, building rasterisation and the duplicate-occupancy metric.

Reservations are half-open ``[start, end)`` intervals in continuous time, so
an aircraft leaving a block at ``t`` and another entering it at ``t`` do not
conflict.  Buildings are stored as owner ``0`` over ``[0, inf)``.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .exceptions import ConflictError, MalformedPolygon
from .grid import BlockIndex, GridSpec

INF = float("inf")
BUILDING_OWNER = 0


class TimeInterval(NamedTuple):
    start: float
    end: float

    @property
    def length(self) -> float:
        return self.end - self.start


def _as_interval(iv) -> tuple[float, float]:
    start, end = float(iv[0]), float(iv[1])
    if end < start:
        raise ValueError(f"interval end {end} precedes start {start}")
    return start, end


class OccupancyLedger:
    """Per-block sorted, pairwise-disjoint interval reservations.

    Blocks are addressed by :class:`BlockIndex`; the underscore methods take
    flat ids (``GridSpec.flat``) and skip validation for use inside search.
    """

    def __init__(self, grid: GridSpec):
        self.grid = grid
        # flat id -> (starts, ends, owners); ends are sorted too since
        # intervals are disjoint
        self._slots: dict[int, tuple[list, list, list]] = {}
        self.static = bytearray(grid.n_blocks)

    # -- flat-id fast paths -------------------------------------------------

    def _free(self, bid: int, start: float, end: float) -> bool:
        slot = self._slots.get(bid)
        if slot is None or end <= start:
            return True
        starts, ends, _ = slot
        n = bisect_right(ends, start)
        return n == len(ends) or starts[n] >= end

    def _blocker(self, bid: int, start: float, end: float):
        slot = self._slots.get(bid)
        if slot is None or end <= start:
            return None
        starts, ends, owners = slot
        n = bisect_right(ends, start)
        if n < len(ends) and starts[n] < end:
            return (starts[n], ends[n], owners[n])
        return None

    def _earliest(self, bid: int, t: float, duration: float) -> float:
        slot = self._slots.get(bid)
        if slot is None:
            return t
        starts, ends, _ = slot
        n = bisect_right(ends, t)
        while n < len(ends) and starts[n] < t + duration:
            t = ends[n]
            n += 1
        return t

    def _owner_at(self, bid: int, t: float):
        slot = self._slots.get(bid)
        if slot is None:
            return None
        starts, ends, owners = slot
        n = bisect_right(ends, t)
        if n < len(ends) and starts[n] <= t:
            return owners[n]
        return None

    def _insert(self, bid: int, start: float, end: float, owner) -> None:
        slot = self._slots.get(bid)
        if slot is None:
            self._slots[bid] = ([start], [end], [owner])
            return
        starts, ends, owners = slot
        n = bisect_right(starts, start)
        starts.insert(n, start)
        ends.insert(n, end)
        owners.insert(n, owner)

    # -- public API ---------------------------------------------------------

    def _bid(self, b) -> int:
        if not self.grid.contains(b):
            raise IndexError(f"block {tuple(b)} outside grid {self.grid.shape}")
        return self.grid.flat(b)

    def is_free(self, b, iv) -> bool:
        """True iff no stored interval overlaps ``iv`` with positive measure."""
        start, end = _as_interval(iv)
        return self._free(self._bid(b), start, end)

    def reserve(self, b, iv, owner) -> None:
        start, end = _as_interval(iv)
        bid = self._bid(b)
        if end <= start:
            return
        blocking = self._blocker(bid, start, end)
        if blocking is not None:
            raise ConflictError(BlockIndex(*b), blocking)
        self._insert(bid, start, end, owner)

    def earliest_free_after(self, b, t: float, duration: float) -> float:
        """Smallest ``t' >= t`` with ``[t', t' + duration)`` free; ``inf`` if never."""
        if not duration > 0:
            raise ValueError(f"duration must be positive, got {duration}")
        return self._earliest(self._bid(b), float(t), float(duration))

    def owner_at(self, b, t: float):
        """Owner holding ``b`` at instant ``t`` or ``None``."""
        return self._owner_at(self._bid(b), float(t))

    def add_buildings(self, blocks: Iterable) -> None:
        for b in blocks:
            bid = self._bid(b)
            if self.static[bid]:
                continue
            if bid in self._slots:
                raise ConflictError(BlockIndex(*b), self.intervals(b)[0],
                                    "cannot add a building over existing reservations")
            self.static[bid] = 1
            self._slots[bid] = ([0.0], [INF], [BUILDING_OWNER])

    def is_building(self, b) -> bool:
        return bool(self.static[self._bid(b)])

    @property
    def building_blocks(self) -> set[BlockIndex]:
        return {self.grid.unflat(n) for n, flag in enumerate(self.static) if flag}

    def intervals(self, b) -> list[tuple[float, float, object]]:
        slot = self._slots.get(self._bid(b))
        if slot is None:
            return []
        return list(zip(*slot))

    def blocks(self) -> list[BlockIndex]:
        return [self.grid.unflat(bid) for bid in sorted(self._slots)]

    def is_consistent(self) -> bool:
        """Full scan: every block's intervals sorted and pairwise disjoint."""
        for starts, ends, _ in self._slots.values():
            for n in range(len(starts)):
                if ends[n] < starts[n]:
                    return False
                if n and starts[n] < ends[n - 1]:
                    return False
        return True

    def copy(self) -> "OccupancyLedger":
        other = OccupancyLedger(self.grid)
        other.static = bytearray(self.static)
        other._slots = {bid: (list(s), list(e), list(o)) for bid, (s, e, o) in self._slots.items()}
        return other

    def remove_owner(self, owner) -> int:
        """Drop every interval held by ``owner``; returns how many were removed."""
        removed = 0
        for bid in list(self._slots):
            starts, ends, owners = self._slots[bid]
            keep = [n for n, o in enumerate(owners) if o != owner]
            if len(keep) == len(owners):
                continue
            removed += len(owners) - len(keep)
            if keep:
                self._slots[bid] = ([starts[n] for n in keep], [ends[n] for n in keep],
                                    [owners[n] for n in keep])
            else:
                del self._slots[bid]
        return removed

    def to_dict(self) -> dict:
        """Debug export ``"i,j,k" -> [[start, end, owner], ...]``; ``null`` end means unbounded."""
        out = {}
        for bid in sorted(self._slots):
            i, j, k = self.grid.unflat(bid)
            out[f"{i},{j},{k}"] = [
                [s, None if math.isinf(e) else e, o] for s, e, o in zip(*self._slots[bid])
            ]
        return out

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)


# -- buildings ----------------------------------------------------------------


def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment(ax, ay, bx, by, px, py) -> bool:
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def segments_intersect(p1, p2, q1, q2) -> bool:
    """Closed segment intersection, touching and collinear overlap included."""
    d1 = _orient(*q1, *q2, *p1)
    d2 = _orient(*q1, *q2, *p2)
    d3 = _orient(*p1, *p2, *q1)
    d4 = _orient(*p1, *p2, *q2)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True
    if d1 == 0 and _on_segment(*q1, *q2, *p1):
        return True
    if d2 == 0 and _on_segment(*q1, *q2, *p2):
        return True
    if d3 == 0 and _on_segment(*p1, *p2, *q1):
        return True
    if d4 == 0 and _on_segment(*p1, *p2, *q2):
        return True
    return False


def polygon_area(poly) -> float:
    s = 0.0
    n = len(poly)
    for m in range(n):
        x0, y0 = poly[m]
        x1, y1 = poly[(m + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def is_simple(poly) -> bool:
    n = len(poly)
    edges = [(poly[m], poly[(m + 1) % n]) for m in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            if b == a + 1 or (a == 0 and b == n - 1):
                # adjacent edges share one vertex; reject only a fold-back
                shared = edges[a][1] if b == a + 1 else edges[a][0]
                p, q = (edges[a][0], edges[b][1]) if b == a + 1 else (edges[a][1], edges[b][0])
                if _orient(*p, *shared, *q) == 0 and (
                    _on_segment(*shared, *p, *q) or _on_segment(*shared, *q, *p)
                ):
                    return False
                continue
            if segments_intersect(*edges[a], *edges[b]):
                return False
    return True


@dataclass(frozen=True)
class BuildingFootprint:
    polygon: tuple[tuple[float, float], ...]
    height: float

    def __post_init__(self):
        poly = tuple((float(x), float(y)) for x, y in self.polygon)
        object.__setattr__(self, "polygon", poly)
        if len(poly) < 3:
            raise MalformedPolygon(f"polygon needs at least 3 vertices, got {len(poly)}")
        if not self.height > 0:
            raise MalformedPolygon(f"building height must be positive, got {self.height}")
        if polygon_area(poly) == 0.0 or not is_simple(poly):
            raise MalformedPolygon("polygon is degenerate or self-intersecting")

    def to_dict(self) -> dict:
        return {"polygon": [list(v) for v in self.polygon], "height": self.height}


def point_in_polygon(x: float, y: float, poly) -> bool:
    """Even-odd ray cast; points on the boundary may fall either way."""
    inside = False
    n = len(poly)
    x0, y0 = poly[-1]
    for m in range(n):
        x1, y1 = poly[m]
        if (y1 > y) != (y0 > y):
            xc = x1 + (y - y1) * (x0 - x1) / (y0 - y1)
            if x < xc:
                inside = not inside
        x0, y0 = x1, y1
    return inside


def _segment_hits_open_box(x0, y0, x1, y1, xmin, ymin, xmax, ymax) -> bool:
    lo, hi = 0.0, 1.0
    for p, d, bmin, bmax in ((x0, x1 - x0, xmin, xmax), (y0, y1 - y0, ymin, ymax)):
        if d == 0.0:
            if not bmin < p < bmax:
                return False
            continue
        t0, t1 = (bmin - p) / d, (bmax - p) / d
        if t0 > t1:
            t0, t1 = t1, t0
        lo, hi = max(lo, t0), min(hi, t1)
        if lo >= hi:
            return False
    return lo < hi


def rect_overlaps_polygon(xmin, ymin, xmax, ymax, poly) -> bool:
    """Whether the rectangle and polygon share a region of positive area.

    Either some polygon edge crosses the open rectangle, or no edge does and
    the open rectangle lies wholly inside or outside; its centre decides.
    """
    n = len(poly)
    for m in range(n):
        x0, y0 = poly[m - 1]
        x1, y1 = poly[m]
        if _segment_hits_open_box(x0, y0, x1, y1, xmin, ymin, xmax, ymax):
            return True
    return point_in_polygon(0.5 * (xmin + xmax), 0.5 * (ymin + ymax), poly)


def footprint_cells(fp: BuildingFootprint, g: GridSpec) -> list[tuple[int, int]]:
    xs = [v[0] - g.origin[0] for v in fp.polygon]
    ys = [v[1] - g.origin[1] for v in fp.polygon]
    i0 = max(0, int(math.floor(min(xs) / g.a)))
    i1 = min(g.I - 1, int(math.floor(max(xs) / g.a)))
    j0 = max(0, int(math.floor(min(ys) / g.a)))
    j1 = min(g.J - 1, int(math.floor(max(ys) / g.a)))
    cells = []
    poly = list(zip(xs, ys))
    for j in range(j0, j1 + 1):
        for i in range(i0, i1 + 1):
            if rect_overlaps_polygon(i * g.a, j * g.a, (i + 1) * g.a, (j + 1) * g.a, poly):
                cells.append((i, j))
    return cells


def rasterize_buildings(footprints: Iterable[BuildingFootprint], g: GridSpec) -> set[BlockIndex]:
    """Blocks sharing positive volume with any building.

    A building standing on the grid floor with height ``H`` reaches layers
    ``k`` with ``k * h < H``.
    """
    out: set[BlockIndex] = set()
    for fp in footprints:
        top = fp.height - g.origin[2]
        if top <= 0:
            continue
        layers = min(g.K, int(math.ceil(top / g.h)))
        for i, j in footprint_cells(fp, g):
            for k in range(layers):
                out.add(BlockIndex(i, j, k))
    return out


def buildings_from_list(items) -> list[BuildingFootprint]:
    return [BuildingFootprint(tuple(tuple(v) for v in it["polygon"]), float(it["height"]))
            for it in items]


def load_buildings(path) -> list[BuildingFootprint]:
    with open(path) as fh:
        return buildings_from_list(json.load(fh))


def save_buildings(footprints, path) -> None:
    with open(path, "w") as fh:
        json.dump([fp.to_dict() for fp in footprints], fh)


# -- conflict metrics ---------------------------------------------------------


def _first_sample(t: float, dt: float) -> int:
    """Smallest n >= 0 with n * dt >= t."""
    if t <= 0:
        return 0
    n = math.ceil(t / dt)
    while n > 0 and (n - 1) * dt >= t:
        n -= 1
    while n * dt < t:
        n += 1
    return n


def duplicate_occupancy_time(trajectories, dt: float = 1.0) -> float:
    """Block-seconds during which two or more flights share a block.

    Time is sampled at ``0, dt, 2 dt, ...``; each (block, sample) held by at
    least two trajectories contributes ``dt``.  Only trajectory visits count,
    never buildings or post-landing holds.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    per_block: dict[tuple, dict[int, list]] = defaultdict(lambda: defaultdict(list))
    for n, traj in enumerate(trajectories):
        for v in traj.visits:
            lo = _first_sample(v.t_enter, dt)
            hi = _first_sample(v.t_exit, dt)
            if hi > lo:
                per_block[tuple(v.block)][n].append((lo, hi))
    samples = 0
    for owners in per_block.values():
        if len(owners) < 2:
            continue
        events = []
        for ranges in owners.values():
            ranges.sort()
            merged = [list(ranges[0])]
            for lo, hi in ranges[1:]:
                if lo <= merged[-1][1]:
                    merged[-1][1] = max(merged[-1][1], hi)
                else:
                    merged.append([lo, hi])
            for lo, hi in merged:
                events.append((lo, 1))
                events.append((hi, -1))
        events.sort()
        depth = 0
        prev = None
        for t, delta in events:
            if depth >= 2:
                samples += t - prev
            depth += delta
            prev = t
    return samples * dt


def conflict_events(trajectories) -> int:
    """Pairs of visits by different flights overlapping in one block with positive measure."""
    per_block: dict[tuple, list] = defaultdict(list)
    for n, traj in enumerate(trajectories):
        for v in traj.visits:
            if v.t_exit > v.t_enter:
                per_block[tuple(v.block)].append((v.t_enter, v.t_exit, n))
    count = 0
    for visits in per_block.values():
        visits.sort()
        for a in range(len(visits)):
            s_a, e_a, o_a = visits[a]
            for b in range(a + 1, len(visits)):
                s_b, e_b, o_b = visits[b]
                if s_b >= e_a:
                    break
                if o_a != o_b:
                    count += 1
    return count
