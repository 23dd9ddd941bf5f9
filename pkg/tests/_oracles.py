"""Independent reference implementations used to check the planners."""

from __future__ import annotations

import itertools
import math

import networkx as nx

from airmatrix.grid import GridSpec


def offsets():
    return [d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0)]


def step_length(d, g: GridSpec) -> float:
    di, dj, dk = d
    return math.sqrt((di * g.a) ** 2 + (dj * g.a) ** 2 + (dk * g.h) ** 2)


def step_elevation(d, g: GridSpec) -> float:
    di, dj, dk = d
    return math.atan2(abs(dk) * g.h, math.hypot(di * g.a, dj * g.a))


def speed_brentq(perf, phi: float) -> float:
    from scipy.optimize import brentq

    s = math.sin(abs(phi))
    f = lambda v: perf.e * v**3 + perf.m * perf.g * v * s - perf.P_max  # noqa: E731
    if f(perf.v_mh) <= 0:
        return perf.v_mh
    return brentq(f, 1e-9, perf.v_mh, xtol=1e-14, rtol=1e-15)


def grid_graph(g: GridSpec, perf, scale: float, blocked=()) -> nx.DiGraph:
    """26-connected block graph weighted by flight time, built from first principles."""
    blocked = set(map(tuple, blocked))
    speeds = {}
    G = nx.DiGraph()
    for i, j, k in itertools.product(range(g.I), range(g.J), range(g.K)):
        if (i, j, k) in blocked:
            continue
        G.add_node((i, j, k))
        for d in offsets():
            n = (i + d[0], j + d[1], k + d[2])
            if not (0 <= n[0] < g.I and 0 <= n[1] < g.J and 0 <= n[2] < g.K) or n in blocked:
                continue
            phi = step_elevation(d, g)
            if phi not in speeds:
                speeds[phi] = speed_brentq(perf, phi) * scale
            G.add_edge((i, j, k), n, weight=step_length(d, g) / speeds[phi])
    return G


class TickLedger:
    """Brute-force occupancy of one block sampled on integer ticks."""

    def __init__(self, horizon: int):
        self.owner = [None] * horizon

    def is_free(self, s: int, e: int) -> bool:
        return all(o is None for o in self.owner[s:e])

    def reserve(self, s: int, e: int, who) -> bool:
        if not self.is_free(s, e):
            return False
        for t in range(s, e):
            self.owner[t] = who
        return True

    def earliest(self, t: int, dur: int) -> int:
        while not self.is_free(t, t + dur):
            t += 1
        return t


def pairwise_overlaps(trajs) -> list:
    """Every positive-measure overlap between reservations of different flights."""
    by_block: dict = {}
    for t in trajs:
        for block, s, e in t.reservations():
            by_block.setdefault(tuple(block), []).append((s, e, t.flight_id))
    bad = []
    for block, ivs in by_block.items():
        for (s1, e1, a), (s2, e2, b) in itertools.combinations(ivs, 2):
            if a != b and min(e1, e2) > max(s1, s2):
                bad.append((block, a, b))
    return bad


def sampled_duplicates(trajs, dt: float) -> float:
    """Direct transcription of the sampled step-function metric."""
    if not trajs:
        return 0.0
    horizon = max(v.t_exit for t in trajs for v in t.visits)
    count = 0
    n = 0
    while n * dt < horizon:
        t = n * dt
        seen: dict = {}
        for tr in trajs:
            for b in {tuple(v.block) for v in tr.visits if v.t_enter <= t < v.t_exit}:
                seen[b] = seen.get(b, 0) + 1
        count += sum(1 for c in seen.values() if c >= 2)
        n += 1
    return count * dt


def winding_inside(x: float, y: float, poly) -> bool:
    """Non-zero winding rule, independent of the package's ray cast."""
    wn = 0
    n = len(poly)
    for m in range(n):
        (x0, y0), (x1, y1) = poly[m], poly[(m + 1) % n]
        cross = (x1 - x0) * (y - y0) - (x - x0) * (y1 - y0)
        if y0 <= y < y1 and cross > 0:
            wn += 1
        elif y1 <= y < y0 and cross < 0:
            wn -= 1
    return wn != 0


def star_polygon(rng, cx, cy, r_min, r_max, n_min=3, n_max=9):
    """Random simple polygon around a centre.

    Angles are jittered within equal sectors so no angular gap reaches pi,
    which keeps the star-shaped outline simple.
    """
    n = int(rng.integers(n_min, n_max + 1))
    angles = [(m + rng.uniform(0.1, 0.9)) * 2 * math.pi / n for m in range(n)]
    radii = rng.uniform(r_min, r_max, n)
    return [(cx + r * math.cos(a), cy + r * math.sin(a)) for a, r in zip(angles, radii)]


def simple_paths(G: nx.DiGraph, s, t, cutoff):
    return nx.all_simple_paths(G, s, t, cutoff=cutoff)


def best_waits(path, link_times, reserved, t_dep=0.0, step=0.5, max_wait=10.0):
    """Earliest arrival along ``path`` with waits on a lattice, goal held forever.

    ``reserved`` maps block -> list of (start, end) taken by others.  Every
    combination of waits is explored as a set of reachable centre-arrival
    times, each block's occupancy checked exactly once its exit is fixed.
    Returns ``(arrival, waits)`` or ``None``.
    """
    def free(b, s, e):
        return all(not (min(e, r1) > max(s, r0)) for r0, r1 in reserved.get(b, ()))

    waits_grid = [n * step for n in range(int(max_wait / step) + 1)]
    # frontier: centre-arrival time -> (enter time of current block, waits so far)
    frontier = {t_dep: (t_dep, [])}
    for m in range(len(path) - 1):
        L = link_times[m]
        nxt = {}
        for t, (e_cur, ws) in frontier.items():
            for w in waits_grid:
                t_out = t + w + L / 2
                if not free(path[m], e_cur, t_out):
                    break
                t_c = t_out + L / 2
                if m + 1 == len(path) - 1:
                    ok = free(path[m + 1], t_out, math.inf)
                else:
                    ok = True
                if ok and t_c not in nxt:
                    nxt[t_c] = (t_out, ws + [w])
        frontier = nxt
        if not frontier:
            return None
    t = min(frontier)
    return t - t_dep, frontier[t][1]
