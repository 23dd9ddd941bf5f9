"""Comparison metrics between the A* baseline and conflict-free plans."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .exceptions import IdMismatch
from .grid import GridSpec
from .occupancy import conflict_events, duplicate_occupancy_time


@dataclass(frozen=True)
class FlightDelay:
    id: str
    baseline_s: float
    cfa_s: float
    delay_s: float
    ratio: float


@dataclass
class ComparisonReport:
    flights: list[FlightDelay]
    accumulated_delay: list[float]
    conflict_curve: list[float] = field(default_factory=list)
    conflict_events: int = 0
    failures: dict = field(default_factory=dict)
    baseline_seconds: list[float] = field(default_factory=list)
    cfa_seconds: list[float] = field(default_factory=list)

    @property
    def total_delay(self) -> float:
        return self.accumulated_delay[-1] if self.accumulated_delay else 0.0

    @property
    def total_conflict(self) -> float:
        return self.conflict_curve[-1] if self.conflict_curve else 0.0

    @property
    def delays(self) -> np.ndarray:
        return np.array([f.delay_s for f in self.flights])

    @property
    def max_flight_time(self) -> float:
        return max((f.cfa_s for f in self.flights), default=0.0)


def delay_report(baseline, cfa) -> ComparisonReport:
    """Per-flight delay of ``cfa`` against ``baseline``, in baseline order."""
    base = {t.flight_id: t for t in baseline}
    other = {t.flight_id: t for t in cfa}
    if len(base) != len(baseline) or len(other) != len(cfa) or set(base) != set(other):
        raise IdMismatch("baseline and conflict-free trajectory sets carry different flight ids")
    rows = []
    acc = []
    total = 0.0
    for t in baseline:
        b = t.flight_time
        c = other[t.flight_id].flight_time
        delay = c - b
        rows.append(FlightDelay(t.flight_id, b, c, delay, delay / b if b > 0 else 0.0))
        total += delay
        acc.append(total)
    return ComparisonReport(flights=rows, accumulated_delay=acc)


def conflict_curve(trajs, dt: float = 1.0) -> list[float]:
    """Running duplicate-occupancy time: entry ``n-1`` covers the first ``n`` flights."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    from .occupancy import _first_sample

    counts: dict = {}
    curve = []
    samples = 0
    for traj in trajs:
        mine = set()
        for v in traj.visits:
            lo = _first_sample(v.t_enter, dt)
            hi = _first_sample(v.t_exit, dt)
            key = tuple(v.block)
            for n in range(lo, hi):
                mine.add((key, n))
        for cell in mine:
            c = counts.get(cell, 0) + 1
            counts[cell] = c
            if c == 2:
                samples += 1
        curve.append(samples * dt)
    return curve


@dataclass
class LayerHeatmap:
    """Occupied seconds per block, indexed ``[k, i, j]``."""

    grid: GridSpec
    seconds: np.ndarray

    def layer(self, k: int) -> np.ndarray:
        return self.seconds[k]

    @property
    def total(self) -> float:
        return float(self.seconds.sum())

    def layer_fractions(self) -> np.ndarray:
        per = self.seconds.reshape(self.grid.K, -1).sum(axis=1)
        s = per.sum()
        return per / s if s > 0 else per

    def to_json(self, k: int) -> str:
        return json.dumps({"layer": k, "a": self.grid.a, "h": self.grid.h,
                           "seconds": self.seconds[k].tolist()})


def heatmap(trajs, grid: GridSpec) -> LayerHeatmap:
    out = np.zeros((grid.K, grid.I, grid.J))
    for traj in trajs:
        for v in traj.visits:
            i, j, k = v.block
            out[k, i, j] += v.t_exit - v.t_enter
    return LayerHeatmap(grid, out)


@dataclass(frozen=True)
class SweepRow:
    window_s: float
    flights_per_min: float
    conflicts: float
    total_delay_s: float
    conflict_events: int
    failures: int


def compare(plans, env, dt: float = 1.0, jobs: int = 1):
    """Plan ``plans`` with both planners and report delays and baseline conflicts.

    Returns ``(baseline, cfa, report)``; delays are computed over flights
    both planners could route.
    """
    from .batch import plan_baseline, plan_fcfs

    base_t, cfa_t = [], []
    baseline, bfail = plan_baseline(plans, env, jobs=jobs, timings=base_t if jobs <= 1 else None)
    cfa, cfail = plan_fcfs(plans, env, timings=cfa_t)
    ok = {t.flight_id for t in cfa}
    paired = [t for t in baseline if t.flight_id in ok]
    pair_ids = {t.flight_id for t in paired}
    report = delay_report(paired, [t for t in cfa if t.flight_id in pair_ids])
    report.conflict_curve = conflict_curve(baseline, dt)
    report.conflict_events = conflict_events(baseline)
    fails: dict = {}
    for tag, items in (("baseline", bfail), ("cfa", cfail)):
        for f in items:
            fails.setdefault(tag, {}).setdefault(f.error, 0)
            fails[tag][f.error] += 1
    report.failures = fails
    report.baseline_seconds = base_t
    report.cfa_seconds = cfa_t
    return baseline, cfa, report


def density_sweep(windows, base_cfg, dt: float | None = None) -> list[SweepRow]:
    """Re-run the comparison for each departure window with the same plans otherwise."""
    from .batch import build_environment, generate_scenario

    windows = list(windows)
    if not windows:
        raise ValueError("at least one window is required")
    env = build_environment(base_cfg)
    dt = base_cfg.dt if dt is None else dt
    rows = []
    for w in windows:
        cfg = base_cfg.replace(window=float(w))
        plans = generate_scenario(cfg, env)
        _, cfa, report = compare(plans, env, dt)
        rows.append(SweepRow(
            window_s=float(w),
            flights_per_min=cfg.count / (float(w) / 60.0),
            conflicts=report.total_conflict,
            total_delay_s=report.total_delay,
            conflict_events=report.conflict_events,
            failures=cfg.count - len(cfa),
        ))
    return rows


# -- writers ------------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def write_delays(report: ComparisonReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "baseline_s", "cfa_s", "delay_s", "ratio"])
        for f in report.flights:
            w.writerow([f.id, _fmt(f.baseline_s), _fmt(f.cfa_s), _fmt(f.delay_s), _fmt(f.ratio)])


def write_conflict_curve(curve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "cumulative_block_seconds"])
        for n, v in enumerate(curve, start=1):
            w.writerow([n, _fmt(v)])


def write_sweep(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_s", "flights_per_min", "conflicts", "total_delay_s",
                    "conflict_events", "failures"])
        for r in rows:
            w.writerow([_fmt(r.window_s), _fmt(r.flights_per_min), _fmt(r.conflicts),
                        _fmt(r.total_delay_s), r.conflict_events, r.failures])


def write_heatmaps(hm: LayerHeatmap, out_dir, prefix: str = "heatmap") -> list[str]:
    paths = []
    for k in range(hm.grid.K):
        p = os.path.join(out_dir, f"{prefix}_{k}.json")
        with open(p, "w") as fh:
            fh.write(hm.to_json(k))
        paths.append(p)
    return paths


def plot_heatmaps(hm: LayerHeatmap, out_dir, fmt: str = "png") -> list[str]:
    """Render one image per layer; returns ``[]`` when matplotlib is missing."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return []
    paths = []
    vmax = float(hm.seconds.max()) or 1.0
    for k in range(hm.grid.K):
        fig, ax = plt.subplots(figsize=(5, 5))
        im = ax.imshow(hm.seconds[k].T, origin="lower", cmap="Greys", vmin=0, vmax=vmax)
        ax.set_title(f"layer {k}")
        fig.colorbar(im, ax=ax, label="occupied s")
        p = os.path.join(out_dir, f"heatmap_{k}.{fmt}")
        fig.savefig(p, bbox_inches="tight")
        plt.close(fig)
        paths.append(p)
    return paths
