"""Spatial and temporal partitioning schemes and the planar projection.

The spatial scheme is an axis-aligned square grid over a planar extent.
It may be refined hierarchically: level L cells have side base/2^L and
every level-(L+1) cell nests inside exactly one level-L parent (quad
split). Cells and intervals are half-open on all boundaries, so every
point/timestamp belongs to exactly one partition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import InputError, OutOfExtentError

EARTH_RADIUS_M = 6_371_000.0


class CellId(NamedTuple):
    ix: int
    iy: int
    level: int


class IntervalId(NamedTuple):
    index: int


@dataclass(frozen=True)
class Projection:
    """Equirectangular lon/lat <-> planar meters, affine in each axis."""

    ref_lat_deg: float = 0.0
    earth_radius_m: float = EARTH_RADIUS_M

    def to_planar(self, lon_deg, lat_deg):
        """Project lon/lat degrees to planar (x, y) meters.

        Accepts scalars or numpy arrays. Latitude must satisfy |lat| < 90.
        """
        lat = np.asarray(lat_deg, dtype=float)
        if np.any(np.abs(lat) >= 90.0) or not np.all(np.isfinite(lat)):
            raise InputError("latitude out of range: |lat| must be < 90")
        k = self.earth_radius_m * math.cos(math.radians(self.ref_lat_deg))
        x = np.radians(np.asarray(lon_deg, dtype=float)) * k
        y = np.radians(lat) * self.earth_radius_m
        if x.ndim == 0:
            return float(x), float(y)
        return x, y

    def to_lonlat(self, x_m, y_m):
        """Inverse of to_planar."""
        k = self.earth_radius_m * math.cos(math.radians(self.ref_lat_deg))
        lon = np.degrees(np.asarray(x_m, dtype=float) / k)
        lat = np.degrees(np.asarray(y_m, dtype=float) / self.earth_radius_m)
        if lon.ndim == 0:
            return float(lon), float(lat)
        return lon, lat


@dataclass(frozen=True)
class Extent:
    """Half-open planar rectangle [min_x, max_x) x [min_y, max_y)."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if not (self.max_x > self.min_x and self.max_y > self.min_y):
            raise InputError("extent must have positive width and height")

    def contains(self, x, y) -> bool:
        return self.min_x <= x < self.max_x and self.min_y <= y < self.max_y

    def contains_many(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return (
            (xs >= self.min_x)
            & (xs < self.max_x)
            & (ys >= self.min_y)
            & (ys < self.max_y)
        )


def _lattice_aligned(value: float, origin: float, step: float) -> bool:
    q = (value - origin) / step
    return abs(q - round(q)) <= 1e-9 * max(1.0, abs(q))


@dataclass(frozen=True)
class SpatialScheme:
    """Square-grid spatial partitioning at one hierarchy level.

    base_cell_size_m is the level-0 cell side; this scheme's cells have
    side base_cell_size_m / 2**level. The extent must be aligned to the
    level-0 lattice so that every level tiles it exactly.
    """

    origin_x: float
    origin_y: float
    base_cell_size_m: float
    level: int
    extent: Extent
    projection: Projection = Projection()

    def __post_init__(self):
        if self.base_cell_size_m <= 0:
            raise InputError("cell size must be > 0")
        if self.level < 0:
            raise InputError("level must be >= 0")
        for v, o in (
            (self.extent.min_x, self.origin_x),
            (self.extent.max_x, self.origin_x),
        ):
            if not _lattice_aligned(v, o, self.base_cell_size_m):
                raise InputError("extent x bounds must lie on the level-0 lattice")
        for v, o in (
            (self.extent.min_y, self.origin_y),
            (self.extent.max_y, self.origin_y),
        ):
            if not _lattice_aligned(v, o, self.base_cell_size_m):
                raise InputError("extent y bounds must lie on the level-0 lattice")

    @property
    def cell_size(self) -> float:
        # division by a power of two is exact in binary floating point
        return self.base_cell_size_m / (2 ** self.level)

    def at_level(self, level: int) -> SpatialScheme:
        if level < 0:
            raise InputError("level must be >= 0")
        return SpatialScheme(
            self.origin_x,
            self.origin_y,
            self.base_cell_size_m,
            level,
            self.extent,
            self.projection,
        )

    # --- cell index ranges covering the extent -------------------------
    @property
    def ix_range(self) -> tuple[int, int]:
        s = self.cell_size
        lo = math.floor((self.extent.min_x - self.origin_x) / s)
        hi = math.floor((self.extent.max_x - self.origin_x) / s)  # exclusive
        return lo, hi

    @property
    def iy_range(self) -> tuple[int, int]:
        s = self.cell_size
        lo = math.floor((self.extent.min_y - self.origin_y) / s)
        hi = math.floor((self.extent.max_y - self.origin_y) / s)
        return lo, hi

    @property
    def n_cells(self) -> int:
        x0, x1 = self.ix_range
        y0, y1 = self.iy_range
        return (x1 - x0) * (y1 - y0)

    def cells(self) -> Iterator[CellId]:
        """All cells of the scheme in row-major (iy, then ix) order."""
        x0, x1 = self.ix_range
        y0, y1 = self.iy_range
        for iy in range(y0, y1):
            for ix in range(x0, x1):
                yield CellId(ix, iy, self.level)

    def cell_of(self, x: float, y: float) -> CellId:
        """Cell containing the planar point; boundaries go to the upper-right cell."""
        if not self.extent.contains(x, y):
            raise OutOfExtentError(f"point ({x}, {y}) outside extent {self.extent}")
        s = self.cell_size
        ix = math.floor((x - self.origin_x) / s)
        iy = math.floor((y - self.origin_y) / s)
        return CellId(ix, iy, self.level)

    def cell_indices(self, xs: np.ndarray, ys: np.ndarray):
        """Vectorized cell_of without the extent check (caller filters)."""
        s = self.cell_size
        ix = np.floor((xs - self.origin_x) / s).astype(np.int64)
        iy = np.floor((ys - self.origin_y) / s).astype(np.int64)
        return ix, iy

    def cell_rect(self, cell: CellId) -> tuple[float, float, float, float]:
        """Planar (min_x, min_y, max_x, max_y) of the half-open cell rectangle."""
        if cell.level != self.level:
            s = self.base_cell_size_m / (2 ** cell.level)
        else:
            s = self.cell_size
        x0 = self.origin_x + cell.ix * s
        y0 = self.origin_y + cell.iy * s
        return x0, y0, x0 + s, y0 + s

    def cell_polygon(self, cell: CellId):
        """Planar corner ring (counterclockwise, 4 corners, not closed)."""
        x0, y0, x1, y1 = self.cell_rect(cell)
        return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]

    def cell_lonlat_ring(self, cell: CellId):
        """Closed lon/lat corner ring (5 points) for GeoJSON export."""
        corners = self.cell_polygon(cell)
        ring = [self.projection.to_lonlat(x, y) for x, y in corners]
        ring.append(ring[0])
        return ring


def children_of(cell: CellId) -> list[CellId]:
    """The 4 level-(L+1) cells tiling this cell."""
    ix, iy, lv = cell.ix * 2, cell.iy * 2, cell.level + 1
    return [
        CellId(ix, iy, lv),
        CellId(ix + 1, iy, lv),
        CellId(ix, iy + 1, lv),
        CellId(ix + 1, iy + 1, lv),
    ]


def parent_of(cell: CellId) -> CellId:
    """The level-(L-1) cell containing this cell."""
    if cell.level < 1:
        raise InputError("cell at level 0 has no parent")
    # floor division keeps negative indices nested correctly
    return CellId(cell.ix // 2, cell.iy // 2, cell.level - 1)


@dataclass(frozen=True)
class TemporalScheme:
    """Contiguous half-open intervals [epoch + i*len, epoch + (i+1)*len)."""

    epoch_ms: int
    interval_len_s: float

    def __post_init__(self):
        if self.interval_len_s <= 0:
            raise InputError("interval length must be > 0")
        ms = self.interval_len_s * 1000.0
        if abs(ms - round(ms)) > 1e-6:
            raise InputError("interval length must be a whole number of milliseconds")

    @property
    def interval_len_ms(self) -> int:
        return int(round(self.interval_len_s * 1000.0))

    @property
    def interval_len_h(self) -> float:
        return self.interval_len_ms / 3_600_000.0

    def interval_of(self, ts_ms: int) -> IntervalId:
        return IntervalId((int(ts_ms) - self.epoch_ms) // self.interval_len_ms)

    def interval_indices(self, ts_ms: np.ndarray) -> np.ndarray:
        return (ts_ms.astype(np.int64) - self.epoch_ms) // self.interval_len_ms

    def start_ms(self, interval: IntervalId | int) -> int:
        index = interval.index if isinstance(interval, IntervalId) else int(interval)
        return self.epoch_ms + index * self.interval_len_ms

    def merged(self, k: int) -> TemporalScheme:
        if k < 2:
            raise InputError("merge factor must be >= 2")
        return TemporalScheme(self.epoch_ms, self.interval_len_s * k)
