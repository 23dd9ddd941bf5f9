import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from airmatrix.exceptions import ConflictError, MalformedPolygon
from airmatrix.grid import BlockIndex, GridSpec
from airmatrix.occupancy import (
    BuildingFootprint,
    OccupancyLedger,
    conflict_events,
    duplicate_occupancy_time,
    load_buildings,
    rasterize_buildings,
    save_buildings,
)
from airmatrix.trajectory import BlockVisit, Trajectory4D

from _oracles import TickLedger, pairwise_overlaps, sampled_duplicates, star_polygon, winding_inside

G = GridSpec(I=6, J=6, K=3)
B = BlockIndex(1, 2, 0)


def single(fid, block, s, e):
    return Trajectory4D(fid, [BlockVisit(BlockIndex(*block), s, e, 0.0)], e - s, landing_hold=0)


# -- ledger ---------------------------------------------------------------


def test_is_free_examples():
    led = OccupancyLedger(G)
    assert led.is_free(B, (0, 100))
    led.reserve(B, (0, 10), 1)
    assert led.is_free(B, (10, 12))
    assert not led.is_free(B, (5, 15))


def test_reserve_examples():
    led = OccupancyLedger(G)
    led.reserve(B, (0, 5), 7)
    with pytest.raises(ConflictError) as exc:
        led.reserve(B, (3, 4), 8)
    assert exc.value.blocking == (0, 5, 7)
    assert led.intervals(B) == [(0, 5, 7)]
    led.reserve(B, (5, 6), 8)
    assert led.intervals(B) == [(0, 5, 7), (5, 6, 8)]


def test_earliest_examples():
    led = OccupancyLedger(G)
    assert led.earliest_free_after(B, 4, 2) == 4
    led.reserve(B, (0, 10), 1)
    assert led.earliest_free_after(B, 4, 2) == 10
    led.reserve(B, (11, 20), 2)
    assert led.earliest_free_after(B, 4, 2) == 20
    assert led.earliest_free_after(B, 4, 1) == 10


def test_buildings_never_free():
    led = OccupancyLedger(G)
    led.add_buildings([B])
    assert led.is_building(B)
    assert led.earliest_free_after(B, 0, 1) == math.inf
    assert led.owner_at(B, 1e9) == 0
    with pytest.raises(ConflictError):
        led.reserve(B, (1e6, 1e6 + 1), 3)


def test_earliest_rejects_zero_duration():
    with pytest.raises(ValueError):
        OccupancyLedger(G).earliest_free_after(B, 0, 0)


def test_out_of_grid_block():
    with pytest.raises(IndexError):
        OccupancyLedger(G).is_free((6, 0, 0), (0, 1))


def test_copy_remove_export(tmp_path):
    led = OccupancyLedger(G)
    led.reserve(B, (0, 5), "a")
    led.reserve(B, (6, math.inf), "b")
    other = led.copy()
    other.reserve(B, (5, 6), "c")
    assert len(led.intervals(B)) == 2
    assert other.remove_owner("c") == 1
    assert led.to_dict() == {"1,2,0": [[0, 5, "a"], [6, None, "b"]]}
    led.dump(tmp_path / "ledger.json")
    assert json.loads((tmp_path / "ledger.json").read_text()) == led.to_dict()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 60), st.integers(1, 15)),
                max_size=40))
def test_reserve_matches_is_free(ops):
    led = OccupancyLedger(G)
    for blk, s, d in ops:
        b = (blk, 0, 0)
        free = led.is_free(b, (s, s + d))
        try:
            led.reserve(b, (s, s + d), len(ops))
            ok = True
        except ConflictError:
            ok = False
        assert ok == free
        assert led.is_consistent()


def random_ledger_ops(rng, n_ops):
    """Reserve/query/earliest ops on one block on a 0.1 s lattice, checked by a tick scanner."""
    led = OccupancyLedger(G)
    ref = TickLedger(4000)
    for n in range(n_ops):
        op = rng.integers(3)
        s = int(rng.integers(0, 2000))
        d = int(rng.integers(1, 60))
        iv = (s * 0.1, (s + d) * 0.1)
        if op == 0:
            expect = ref.reserve(s, s + d, n)
            try:
                led.reserve(B, iv, n)
                got = True
            except ConflictError:
                got = False
            assert got == expect
        elif op == 1:
            assert led.is_free(B, iv) == ref.is_free(s, s + d)
        else:
            t = led.earliest_free_after(B, s * 0.1, d * 0.1)
            assert t == pytest.approx(ref.earliest(s, d) * 0.1, abs=1e-9)
    assert led.is_consistent()


def test_ledger_matches_scanner():
    random_ledger_ops(np.random.default_rng(5), 1000)


# -- footprints and raster --------------------------------------------------


def test_raster_examples():
    sq = BuildingFootprint(((40, 60), (60, 60), (60, 80), (40, 80)), 50)
    assert rasterize_buildings([sq], G) == {(2, 3, 0), (2, 3, 1)}
    assert rasterize_buildings([], G) == set()
    tri = BuildingFootprint(((15, 15), (25, 15), (15, 25)), 10)
    assert (0, 0, 0) in rasterize_buildings([tri], G)


def test_height_layers():
    sq = [((0, 0), (20, 0), (20, 20), (0, 20))]
    assert rasterize_buildings([BuildingFootprint(sq[0], 40)], G) == {(0, 0, 0)}
    assert rasterize_buildings([BuildingFootprint(sq[0], 40.5)], G) == {(0, 0, 0), (0, 0, 1)}
    assert len(rasterize_buildings([BuildingFootprint(sq[0], 500)], G)) == 3


@pytest.mark.parametrize("poly, h", [
    (((0, 0), (1, 1)), 10),
    (((0, 0), (10, 10), (10, 0), (0, 10)), 10),
    (((0, 0), (1, 0), (2, 0)), 10),
    (((0, 0), (1, 0), (0, 1)), 0),
])
def test_malformed(poly, h):
    with pytest.raises(MalformedPolygon):
        BuildingFootprint(poly, h)


def test_buildings_file(tmp_path):
    fps = [BuildingFootprint(((0, 0), (30, 0), (0, 30)), 12.5)]
    save_buildings(fps, tmp_path / "b.json")
    assert load_buildings(tmp_path / "b.json") == fps


def monte_carlo_raster(rng, fp, g, n=10_000):
    xs = [p[0] for p in fp.polygon]
    ys = [p[1] for p in fp.polygon]
    got = rasterize_buildings([fp], g)
    hit = 0
    while hit < n:
        x = rng.uniform(min(xs), max(xs))
        y = rng.uniform(min(ys), max(ys))
        if not winding_inside(x, y, fp.polygon):
            continue
        z = rng.uniform(0, min(fp.height, g.ceiling))
        b = (int(x // g.a), int(y // g.a), int(z // g.h))
        if b not in got:
            return b
        hit += 1
    return None


def test_raster_monte_carlo_small():
    rng = np.random.default_rng(1)
    g = GridSpec(I=10, J=10, K=3)
    for _ in range(5):
        poly = star_polygon(rng, 100, 100, 5, 80)
        fp = BuildingFootprint(poly, rng.uniform(5, 130))
        assert monte_carlo_raster(rng, fp, g, 2000) is None


# -- metrics ------------------------------------------------------------------


def test_duplicate_examples():
    a = single("a", (0, 0, 0), 0, 10)
    b = single("b", (0, 0, 0), 5, 15)
    c = single("c", (1, 0, 0), 5, 15)
    assert duplicate_occupancy_time([a, b], 1.0) == 5
    assert duplicate_occupancy_time([a, c], 1.0) == 0
    x = single("x", (0, 0, 0), 0, 3)
    assert duplicate_occupancy_time([x, x], 1.0) == 3
    assert conflict_events([a, b, c]) == 1


def test_dt_must_be_positive():
    with pytest.raises(ValueError):
        duplicate_occupancy_time([], 0)


visit_lists = st.lists(
    st.tuples(st.integers(0, 2), st.floats(0, 30, allow_nan=False),
              st.floats(0.1, 8, allow_nan=False)),
    min_size=1, max_size=4)


@settings(max_examples=80, deadline=None)
@given(st.lists(visit_lists, min_size=1, max_size=4), st.sampled_from([0.5, 1.0, 2.0]))
def test_metric_matches_oracles(specs, dt):
    trajs = [
        Trajectory4D(f"f{n}", [BlockVisit(BlockIndex(b, 0, 0), s, s + d, 0.0)
                               for b, s, d in vs], 0.0, landing_hold=0)
        for n, vs in enumerate(specs)
    ]
    got = duplicate_occupancy_time(trajs, dt)
    assert got == sampled_duplicates(trajs, dt)
    if pairwise_overlaps(trajs) == []:
        assert got == 0
