"""4D trajectory records and their JSON-lines wire format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .grid import BlockIndex


@dataclass(frozen=True)
class BlockVisit:
    block: BlockIndex
    t_enter: float
    t_exit: float
    hover: float = 0.0

    @property
    def duration(self) -> float:
        return self.t_exit - self.t_enter


@dataclass
class Trajectory4D:
    flight_id: str
    visits: list[BlockVisit]
    flight_time: float
    aircraft: str = ""
    planner: str = "astar"
    # seconds the landing block stays held after t_arrive; None holds it forever
    landing_hold: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def t_dep(self) -> float:
        return self.visits[0].t_enter

    @property
    def t_arrive(self) -> float:
        return self.visits[-1].t_exit

    @property
    def blocks(self) -> list[BlockIndex]:
        return [v.block for v in self.visits]

    @property
    def total_hover(self) -> float:
        return sum(v.hover for v in self.visits)

    def reservations(self):
        """Yield ``(block, start, end)`` for every interval the flight holds.

        The final block is held from arrival for ``landing_hold`` seconds
        past the trajectory end, or forever when that is ``None``.
        """
        last = len(self.visits) - 1
        for n, v in enumerate(self.visits):
            if n == last:
                end = float("inf") if self.landing_hold is None else v.t_exit + self.landing_hold
                yield v.block, v.t_enter, end
            else:
                yield v.block, v.t_enter, v.t_exit

    def to_record(self) -> dict:
        return {
            "id": self.flight_id,
            "aircraft": self.aircraft,
            "t_dep": self.t_dep,
            "visits": [
                {"i": v.block.i, "j": v.block.j, "k": v.block.k,
                 "t_enter": v.t_enter, "t_exit": v.t_exit, "hover": v.hover}
                for v in self.visits
            ],
            "flight_time": self.flight_time,
            "planner": self.planner,
        }

    @classmethod
    def from_record(cls, rec: dict, landing_hold: float | None = None) -> "Trajectory4D":
        visits = [
            BlockVisit(BlockIndex(int(v["i"]), int(v["j"]), int(v["k"])),
                       float(v["t_enter"]), float(v["t_exit"]), float(v.get("hover", 0.0)))
            for v in rec["visits"]
        ]
        return cls(flight_id=str(rec["id"]), visits=visits,
                   flight_time=float(rec["flight_time"]), aircraft=rec.get("aircraft", ""),
                   planner=rec.get("planner", "astar"), landing_hold=landing_hold)


def dumps_jsonl(trajs) -> str:
    return "".join(json.dumps(t.to_record(), sort_keys=True) + "\n" for t in trajs)


def write_jsonl(trajs, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_jsonl(trajs))


def read_jsonl(path) -> list[Trajectory4D]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(Trajectory4D.from_record(json.loads(line)))
    return out
