"""AirMatrix geometry: block addressing, point/block mapping and link classes.

Blocks are zero-based ``(i, j, k)`` triples along x, y and z.  A block is
``a`` metres wide in both horizontal directions and ``h`` metres tall.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import NamedTuple

from .exceptions import PointOutOfBounds


class BlockIndex(NamedTuple):
    i: int
    j: int
    k: int


class LinkKind(enum.Enum):
    AXIS_H = "AXIS_H"
    DIAG_H = "DIAG_H"
    VERT = "VERT"
    FACE_DIAG = "FACE_DIAG"
    CORNER_DIAG = "CORNER_DIAG"


@dataclass(frozen=True)
class LinkClass:
    kind: LinkKind
    sign: int  # vertical direction: -1 descend, 0 level, +1 climb
    length: float
    elevation: float  # signed, radians


@dataclass(frozen=True)
class GridSpec:
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    a: float = 20.0
    h: float = 40.0
    I: int = 100
    J: int = 100
    K: int = 3

    def __post_init__(self):
        if not (self.a > 0 and self.h > 0):
            raise ValueError(f"block dimensions must be positive, got a={self.a}, h={self.h}")
        for name in ("I", "J", "K"):
            n = getattr(self, name)
            if int(n) != n or n < 1:
                raise ValueError(f"{name} must be a positive integer, got {n!r}")
            object.__setattr__(self, name, int(n))
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))
        if len(self.origin) != 3:
            raise ValueError("origin must have three coordinates")

    @classmethod
    def from_extent(cls, width, depth, ceiling, a=20.0, h=40.0, origin=(0.0, 0.0, 0.0)):
        """Grid covering ``width x depth`` metres up to ``ceiling``.

        Block counts are rounded down, so a 150 m ceiling with 40 m blocks
        yields three layers.
        """
        return cls(origin=origin, a=a, h=h, I=int(width // a), J=int(depth // a),
                   K=int(ceiling // h))

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.I, self.J, self.K)

    @property
    def n_blocks(self) -> int:
        return self.I * self.J * self.K

    @property
    def ceiling(self) -> float:
        return self.K * self.h

    @property
    def upper(self) -> tuple[float, float, float]:
        ox, oy, oz = self.origin
        return (ox + self.I * self.a, oy + self.J * self.a, oz + self.K * self.h)

    def contains(self, b) -> bool:
        i, j, k = b
        return 0 <= i < self.I and 0 <= j < self.J and 0 <= k < self.K

    def flat(self, b) -> int:
        """Flat id ordered lexicographically by ``(k, j, i)``."""
        i, j, k = b
        return i + self.I * (j + self.J * k)

    def unflat(self, bid: int) -> BlockIndex:
        rest, i = divmod(bid, self.I)
        k, j = divmod(rest, self.J)
        return BlockIndex(i, j, k)

    def to_dict(self) -> dict:
        return {"origin": list(self.origin), "a": self.a, "h": self.h,
                "I": self.I, "J": self.J, "K": self.K}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(origin=tuple(d.get("origin", (0.0, 0.0, 0.0))), a=float(d["a"]),
                   h=float(d["h"]), I=d["I"], J=d["J"], K=d["K"])


def load_grid(path) -> GridSpec:
    with open(path) as fh:
        return GridSpec.from_dict(json.load(fh))


def block_of_point(p, g: GridSpec) -> BlockIndex:
    """Block containing ``p``; points on a shared face go to the higher index."""
    cells = (g.a, g.a, g.h)
    counts = g.shape
    idx = []
    for axis in range(3):
        rel = float(p[axis]) - g.origin[axis]
        extent = counts[axis] * cells[axis]
        if not (0.0 <= rel <= extent):
            raise PointOutOfBounds(f"point {tuple(p)} lies outside the grid box")
        n = int(math.floor(rel / cells[axis]))
        idx.append(min(n, counts[axis] - 1))
    return BlockIndex(*idx)


def center(b, g: GridSpec) -> tuple[float, float, float]:
    i, j, k = b
    ox, oy, oz = g.origin
    return (ox + (i + 0.5) * g.a, oy + (j + 0.5) * g.a, oz + (k + 0.5) * g.h)


def _kind(di: int, dj: int, dk: int) -> LinkKind:
    horiz = abs(di) + abs(dj)
    if dk == 0:
        return LinkKind.AXIS_H if horiz == 1 else LinkKind.DIAG_H
    return {0: LinkKind.VERT, 1: LinkKind.FACE_DIAG, 2: LinkKind.CORNER_DIAG}[horiz]


# (dk, dj, di) ordering is the contract for neighbour enumeration.
OFFSETS: tuple[tuple[int, int, int], ...] = tuple(
    (di, dj, dk)
    for dk in (-1, 0, 1)
    for dj in (-1, 0, 1)
    for di in (-1, 0, 1)
    if (di, dj, dk) != (0, 0, 0)
)


def link_class(kind: LinkKind, sign: int, g: GridSpec) -> LinkClass:
    a, h = g.a, g.h
    if kind is LinkKind.AXIS_H:
        return LinkClass(kind, 0, a, 0.0)
    if kind is LinkKind.DIAG_H:
        return LinkClass(kind, 0, math.sqrt(2.0) * a, 0.0)
    if sign not in (-1, 1):
        raise ValueError(f"{kind.value} links need a vertical sign of -1 or +1")
    if kind is LinkKind.VERT:
        length, run = h, 0.0
    elif kind is LinkKind.FACE_DIAG:
        length, run = math.hypot(a, h), a
    else:
        length, run = math.sqrt(2.0 * a * a + h * h), math.sqrt(2.0) * a
    return LinkClass(kind, sign, length, sign * math.atan2(h, run))


def link_of_offset(offset, g: GridSpec) -> LinkClass:
    di, dj, dk = offset
    return link_class(_kind(di, dj, dk), dk, g)


def link_table(g: GridSpec) -> dict[tuple[LinkKind, int], tuple[float, float]]:
    """All link classes keyed by ``(kind, vertical sign)`` -> ``(length, elevation)``.

    Level links come in two lengths, so there are eight entries spanning the
    seven distinct signed elevations 0, +-corner, +-face and +-90 degrees.
    """
    table = {}
    for kind in LinkKind:
        signs = (0,) if kind in (LinkKind.AXIS_H, LinkKind.DIAG_H) else (-1, 1)
        for s in signs:
            c = link_class(kind, s, g)
            table[(kind, s)] = (c.length, c.elevation)
    return table


def neighbors(b, g: GridSpec) -> list[tuple[BlockIndex, LinkClass]]:
    i, j, k = b
    out = []
    for di, dj, dk in OFFSETS:
        n = (i + di, j + dj, k + dk)
        if g.contains(n):
            out.append((BlockIndex(*n), link_of_offset((di, dj, dk), g)))
    return out
