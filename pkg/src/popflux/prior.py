"""Static population prior: census loading and areal-weighting disaggregation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, NamedTuple, Sequence

import numpy as np

from .errors import InputError, SchemeMismatchError
from .grid import CellId, SpatialScheme, children_of, parent_of

CENSUS_HEADER = ["cell_ix", "cell_iy", "level", "population"]


class CensusReject(NamedTuple):
    line_no: int
    fields: tuple[str, ...]
    reason: str


@dataclass
class StaticPopulation:
    """Persons per cell of one spatial scheme; N is the exact sum."""

    values: dict[CellId, float]
    scheme: SpatialScheme
    total: float = field(init=False)

    def __post_init__(self):
        for c, v in self.values.items():
            if v < 0:
                raise InputError(f"negative population for cell {c}")
        self.total = float(sum(self.values.values()))

    def value(self, cell: CellId) -> float:
        return self.values.get(cell, 0.0)

    def vector(self, cells: Sequence[CellId]) -> np.ndarray:
        return np.asarray([self.values.get(c, 0.0) for c in cells], dtype=float)


def load_static_population(
    stream: IO[str], scheme: SpatialScheme
) -> tuple[StaticPopulation, list[CensusReject]]:
    """Read grid-aligned census CSV. Duplicate cells are fatal; negative
    populations and cells outside the scheme are rejected row by row."""
    reader = csv.reader(stream)
    header = None
    for row in reader:
        if row and row[0].startswith("#"):
            continue
        header = [h.strip() for h in row]
        break
    if header is None:
        raise InputError("census file is empty, expected header " + ",".join(CENSUS_HEADER))
    if header != CENSUS_HEADER:
        raise InputError(
            "unreadable census header: expected %r, got %r" % (",".join(CENSUS_HEADER), ",".join(header))
        )

    x0, x1 = scheme.ix_range
    y0, y1 = scheme.iy_range
    values: dict[CellId, float] = {}
    rejects: list[CensusReject] = []
    for row in reader:
        line_no = reader.line_num
        if not row or row[0].startswith("#"):
            continue
        if len(row) != 4:
            rejects.append(CensusReject(line_no, tuple(row), "expected 4 fields"))
            continue
        try:
            ix = int(row[0])
            iy = int(row[1])
            lv = int(row[2])
            pop = float(row[3])
        except ValueError:
            rejects.append(CensusReject(line_no, tuple(row), "unparseable number"))
            continue
        if lv != scheme.level:
            raise SchemeMismatchError(
                f"census row at line {line_no} has level {lv}, scheme is level {scheme.level}"
            )
        if pop < 0:
            rejects.append(CensusReject(line_no, tuple(row), "negative population"))
            continue
        if not (x0 <= ix < x1 and y0 <= iy < y1):
            rejects.append(CensusReject(line_no, tuple(row), "cell outside extent"))
            continue
        cell = CellId(ix, iy, lv)
        if cell in values:
            raise InputError(f"duplicate census cell {cell} at line {line_no}")
        values[cell] = pop
    return StaticPopulation(values, scheme), rejects


@dataclass(frozen=True)
class SourceZone:
    """One census zone: either a planar polygon or a cell of a source grid."""

    population: float
    polygon: tuple[tuple[float, float], ...] | None = None
    cell: CellId | None = None

    def __post_init__(self):
        if self.population < 0:
            raise InputError("zone population must be >= 0")
        if (self.polygon is None) == (self.cell is None):
            raise InputError("zone needs exactly one of polygon or cell")
        if self.polygon is not None:
            if len(self.polygon) < 3:
                raise InputError("degenerate polygon: fewer than 3 vertices")
            if not all(math.isfinite(x) and math.isfinite(y) for x, y in self.polygon):
                raise InputError("degenerate polygon: non-finite vertex")
            if _ring_area(self.polygon) <= 0.0:
                raise InputError("degenerate polygon: zero area")


def _ring_area(ring: Sequence[tuple[float, float]]) -> float:
    """Absolute shoelace area; the ring need not be closed."""
    area = 0.0
    n = len(ring)
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        area += x0 * y1 - x1 * y0
    return abs(area) * 0.5


def _clip_halfplane(ring, inside, intersect):
    out = []
    n = len(ring)
    for i in range(n):
        cur = ring[i]
        prev = ring[i - 1]
        cur_in = inside(cur)
        prev_in = inside(prev)
        if cur_in:
            if not prev_in:
                out.append(intersect(prev, cur))
            out.append(cur)
        elif prev_in:
            out.append(intersect(prev, cur))
    return out


def _clip_to_rect(ring, x0, y0, x1, y1):
    """Sutherland-Hodgman clip of a convex-or-simple ring to a rectangle."""

    def x_cut(xc):
        def inter(a, b):
            t = (xc - a[0]) / (b[0] - a[0])
            return (xc, a[1] + t * (b[1] - a[1]))

        return inter

    def y_cut(yc):
        def inter(a, b):
            t = (yc - a[1]) / (b[1] - a[1])
            return (a[0] + t * (b[0] - a[0]), yc)

        return inter

    r = list(ring)
    for inside, inter in (
        (lambda p: p[0] >= x0, x_cut(x0)),
        (lambda p: p[0] <= x1, x_cut(x1)),
        (lambda p: p[1] >= y0, y_cut(y0)),
        (lambda p: p[1] <= y1, y_cut(y1)),
    ):
        r = _clip_halfplane(r, inside, inter)
        if len(r) < 3:
            return []
    return r


def _rect_overlap(ax0, ay0, ax1, ay1, bx0, by0, bx1, by1) -> float:
    w = min(ax1, bx1) - max(ax0, bx0)
    h = min(ay1, by1) - max(ay0, by0)
    return w * h if (w > 0 and h > 0) else 0.0


def _zone_overlaps(
    zone: SourceZone, target: SpatialScheme, source_scheme: SpatialScheme | None
) -> dict[CellId, float]:
    """Overlap area between one zone and every target cell it touches."""
    if zone.cell is not None:
        if source_scheme is None:
            raise InputError("cell-based zones need a source scheme")
        rect = source_scheme.cell_rect(zone.cell)
        ring = None
    else:
        xs = [p[0] for p in zone.polygon]
        ys = [p[1] for p in zone.polygon]
        rect = (min(xs), min(ys), max(xs), max(ys))
        ring = zone.polygon

    size = target.cell_size
    gx0, gx1 = target.ix_range
    gy0, gy1 = target.iy_range
    ix_lo = max(gx0, math.floor((rect[0] - target.origin_x) / size))
    ix_hi = min(gx1 - 1, math.floor((rect[2] - target.origin_x) / size))
    iy_lo = max(gy0, math.floor((rect[1] - target.origin_y) / size))
    iy_hi = min(gy1 - 1, math.floor((rect[3] - target.origin_y) / size))

    out: dict[CellId, float] = {}
    for iy in range(iy_lo, iy_hi + 1):
        for ix in range(ix_lo, ix_hi + 1):
            cx0 = target.origin_x + ix * size
            cy0 = target.origin_y + iy * size
            if ring is None:
                a = _rect_overlap(rect[0], rect[1], rect[2], rect[3], cx0, cy0, cx0 + size, cy0 + size)
            else:
                clipped = _clip_to_rect(ring, cx0, cy0, cx0 + size, cy0 + size)
                a = _ring_area(clipped) if clipped else 0.0
            if a > 0.0:
                out[CellId(ix, iy, target.level)] = a
    return out


def disaggregate(
    zones: Sequence[SourceZone],
    target: SpatialScheme,
    source_scheme: SpatialScheme | None = None,
) -> StaticPopulation:
    """Areal weighting: split each zone's population across target cells in
    proportion to overlap area. Total population is conserved; a zone with
    no overlap at all is an error rather than silently lost mass."""
    values: dict[CellId, float] = {}
    for zi, zone in enumerate(zones):
        overlaps = _zone_overlaps(zone, target, source_scheme)
        total = sum(overlaps.values())
        if total <= 0.0:
            if zone.population == 0.0:
                continue
            raise InputError(f"source zone {zi} does not overlap the target extent")
        for cell, a in overlaps.items():
            values[cell] = values.get(cell, 0.0) + zone.population * (a / total)
    return StaticPopulation(values, target)


def coarsen(pop: StaticPopulation, levels: int = 1) -> StaticPopulation:
    """Sum populations up the quad hierarchy (spatial additivity)."""
    if levels < 1:
        raise InputError("levels must be >= 1")
    if pop.scheme.level - levels < 0:
        raise InputError("cannot coarsen below level 0")
    out = pop
    for _ in range(levels):
        values: dict[CellId, float] = {}
        for cell, v in out.values.items():
            p = parent_of(cell)
            values[p] = values.get(p, 0.0) + v
        out = StaticPopulation(values, out.scheme.at_level(out.scheme.level - 1))
    return out


def refine(pop: StaticPopulation, levels: int = 1) -> StaticPopulation:
    """Split populations evenly down the quad hierarchy (uniform areal weighting)."""
    if levels < 1:
        raise InputError("levels must be >= 1")
    out = pop
    for _ in range(levels):
        values: dict[CellId, float] = {}
        for cell, v in out.values.items():
            for ch in children_of(cell):
                values[ch] = v / 4.0
        out = StaticPopulation(values, out.scheme.at_level(out.scheme.level + 1))
    return out
