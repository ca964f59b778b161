"""Dwell-time transform: trajectories -> pseudo-count mass per partition.

A trajectory is treated as the polyline of linear interpolation between
consecutive probes in planar space and time. Each segment is clipped
against temporal interval boundaries first, then against the vertical and
horizontal cell gridlines (parametric clipping, exact at crossings), and
the dwell time of every piece is credited to its (cell, interval) key.

The two transforms the dwell weighting replaces (raw probe counts and
per-trajectory partition touches) are provided as labeled baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError, OutOfExtentError, SchemeMismatchError
from .grid import CellId, IntervalId, SpatialScheme, TemporalScheme, parent_of
from .ingest import Trajectory
from .util import parallel_map

SECONDS_PER_HOUR = 3600.0


@dataclass
class PseudoCountField:
    """Map (cell, interval) -> device-hours under one (spatial, temporal) scheme pair.

    Absent keys mean zero. The total mass contributed by one trajectory
    equals its observed duration in hours.
    """

    entries: dict[tuple[CellId, IntervalId], float]
    sscheme: SpatialScheme
    tscheme: TemporalScheme

    def value(self, cell: CellId, interval: IntervalId) -> float:
        return self.entries.get((cell, interval), 0.0)

    def total_mass(self) -> float:
        return float(sum(self.entries.values()))

    def interval_ids(self) -> list[IntervalId]:
        return sorted({k[1] for k in self.entries}, key=lambda i: i.index)


def _check_same_schemes(a: PseudoCountField, b: PseudoCountField) -> None:
    if a.sscheme != b.sscheme or a.tscheme != b.tscheme:
        raise SchemeMismatchError(
            f"fields computed under different schemes: {a.sscheme}/{a.tscheme} vs {b.sscheme}/{b.tscheme}"
        )


def _clip_segment(t0, t1, x0, y0, x1, y1, ss: SpatialScheme, tsch: TemporalScheme, emit):
    """Clip one linear segment, calling emit(ix, iy, interval_index, dwell_s).

    Times are milliseconds. The split order is fixed (time first, then x/y
    gridlines by parameter) so outputs are reproducible bit for bit.
    """
    dur = t1 - t0
    if dur <= 0:
        return
    len_ms = tsch.interval_len_ms
    epoch = tsch.epoch_ms
    k0 = math.floor((t0 - epoch) / len_ms)
    k1 = math.floor((t1 - epoch) / len_ms)
    # temporal breakpoints strictly inside (t0, t1)
    times = [t0]
    for k in range(k0 + 1, k1 + 1):
        tb = epoch + k * len_ms
        if t0 < tb < t1:
            times.append(tb)
    times.append(t1)

    size = ss.cell_size
    ox, oy = ss.origin_x, ss.origin_y
    dx = x1 - x0
    dy = y1 - y0
    for ta, tb in zip(times[:-1], times[1:]):
        itv = math.floor((ta - epoch) / len_ms)
        ua = (ta - t0) / dur
        ub = (tb - t0) / dur
        us = []
        if dx != 0.0:
            xa = x0 + dx * ua
            xb = x0 + dx * ub
            ia = math.floor((xa - ox) / size)
            ib = math.floor((xb - ox) / size)
            for m in range(min(ia, ib) + 1, max(ia, ib) + 1):
                u = ((ox + m * size) - x0) / dx
                if ua < u < ub:
                    us.append(u)
        if dy != 0.0:
            ya = y0 + dy * ua
            yb = y0 + dy * ub
            ja = math.floor((ya - oy) / size)
            jb = math.floor((yb - oy) / size)
            for m in range(min(ja, jb) + 1, max(ja, jb) + 1):
                u = ((oy + m * size) - y0) / dy
                if ua < u < ub:
                    us.append(u)
        us.sort()
        cuts = [ua, *us, ub]
        for uc, ud in zip(cuts[:-1], cuts[1:]):
            dwell_ms = (t0 + ud * dur) - (t0 + uc * dur)
            if dwell_ms <= 0:
                continue
            um = 0.5 * (uc + ud)
            ix = math.floor((x0 + dx * um - ox) / size)
            iy = math.floor((y0 + dy * um - oy) / size)
            emit(ix, iy, itv, dwell_ms / 1000.0)


def _project_and_check(traj: Trajectory, ss: SpatialScheme):
    xs, ys = ss.projection.to_planar(traj.lon, traj.lat)
    xs = np.atleast_1d(xs)
    ys = np.atleast_1d(ys)
    inside = ss.extent.contains_many(xs, ys)
    if not np.all(inside):
        i = int(np.argmin(inside))
        raise OutOfExtentError(
            f"trajectory {traj.id!r}: probe {i} at ({xs[i]:.1f}, {ys[i]:.1f}) outside extent"
        )
    return xs, ys


def dwell_intersections(
    traj: Trajectory, ss: SpatialScheme, tsch: TemporalScheme
) -> list[tuple[CellId, IntervalId, float]]:
    """Exact per-piece dwell of one trajectory, as (cell, interval, dwell_s).

    Pieces appear in travel order; values for one segment sum to the
    segment duration. A zero-duration trajectory contributes nothing.
    """
    xs, ys = _project_and_check(traj, ss)
    ts = traj.ts
    out: list[tuple[CellId, IntervalId, float]] = []
    lv = ss.level

    def emit(ix, iy, itv, dwell_s):
        out.append((CellId(ix, iy, lv), IntervalId(itv), dwell_s))

    for i in range(len(ts) - 1):
        _clip_segment(
            float(ts[i]), float(ts[i + 1]), xs[i], ys[i], xs[i + 1], ys[i + 1], ss, tsch, emit
        )
    return out


def polyline_dwell_seconds(
    ts_ms: np.ndarray, xs: np.ndarray, ys: np.ndarray, ss: SpatialScheme, tsch: TemporalScheme
) -> dict[tuple[int, int, int], float]:
    """Dwell seconds of a planar polyline, keyed by (ix, iy, interval_index).

    Times may be fractional milliseconds. Segments that stay inside one
    (cell, interval) are accumulated in bulk; only boundary-crossing
    segments go through the exact clipper.
    """
    ts = np.asarray(ts_ms, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    inside = ss.extent.contains_many(xs, ys)
    if not np.all(inside):
        i = int(np.argmin(inside))
        raise OutOfExtentError(f"polyline point {i} at ({xs[i]:.1f}, {ys[i]:.1f}) outside extent")
    n = len(ts)
    acc: dict[tuple[int, int, int], float] = {}
    if n < 2:
        return acc
    ix, iy = ss.cell_indices(xs, ys)
    itv = np.floor((ts - tsch.epoch_ms) / tsch.interval_len_ms).astype(np.int64)
    same = (ix[1:] == ix[:-1]) & (iy[1:] == iy[:-1]) & (itv[1:] == itv[:-1])
    dwell_s = np.diff(ts) / 1000.0

    if np.any(same):
        kx = ix[:-1][same]
        ky = iy[:-1][same]
        kt = itv[:-1][same]
        # pack keys for a fast grouped sum
        kx0, ky0, kt0 = kx.min(), ky.min(), kt.min()
        nx = int(kx.max() - kx0) + 1
        ny = int(ky.max() - ky0) + 1
        packed = ((kt - kt0) * ny + (ky - ky0)) * nx + (kx - kx0)
        uniq, inv = np.unique(packed, return_inverse=True)
        sums = np.bincount(inv, weights=dwell_s[same])
        for key, val in zip(uniq.tolist(), sums.tolist()):
            t_i, rem = divmod(key, nx * ny)
            y_i, x_i = divmod(rem, nx)
            acc[(x_i + int(kx0), y_i + int(ky0), t_i + int(kt0))] = val

    def emit(cx, cy, ct, d_s):
        k = (cx, cy, ct)
        acc[k] = acc.get(k, 0.0) + d_s

    for i in np.nonzero(~same)[0].tolist():
        _clip_segment(
            float(ts[i]), float(ts[i + 1]), xs[i], ys[i], xs[i + 1], ys[i + 1], ss, tsch, emit
        )
    return acc


def _traj_dwell_seconds(
    traj: Trajectory, ss: SpatialScheme, tsch: TemporalScheme
) -> dict[tuple[int, int, int], float]:
    xs, ys = _project_and_check(traj, ss)
    return polyline_dwell_seconds(traj.ts.astype(np.float64), xs, ys, ss, tsch)


def field_of_trajectory(
    traj: Trajectory, ss: SpatialScheme, tsch: TemporalScheme
) -> PseudoCountField:
    """Pseudo-count field (device-hours) of a single trajectory."""
    acc = _traj_dwell_seconds(traj, ss, tsch)
    lv = ss.level
    entries = {
        (CellId(cx, cy, lv), IntervalId(ct)): d / SECONDS_PER_HOUR
        for (cx, cy, ct), d in acc.items()
    }
    return PseudoCountField(entries, ss, tsch)


def dwell_field(
    trajs: Sequence[Trajectory],
    ss: SpatialScheme,
    tsch: TemporalScheme,
    threads: int = 1,
) -> PseudoCountField:
    """Dwell transform of many trajectories in one pass.

    Per-trajectory work is pure; partial results are merged in input order
    so the outcome does not depend on the thread count.
    """
    acc: dict[tuple[int, int, int], float] = {}
    for part in parallel_map(lambda t: _traj_dwell_seconds(t, ss, tsch), trajs, threads):
        for k, v in part.items():
            acc[k] = acc.get(k, 0.0) + v
    lv = ss.level
    entries = {
        (CellId(cx, cy, lv), IntervalId(ct)): d / SECONDS_PER_HOUR
        for (cx, cy, ct), d in acc.items()
    }
    return PseudoCountField(entries, ss, tsch)


def accumulate(parts: Iterable[PseudoCountField]) -> PseudoCountField:
    """Pointwise sum of fields computed under identical schemes."""
    parts = list(parts)
    if not parts:
        raise InputError("accumulate needs at least one field")
    first = parts[0]
    entries: dict[tuple[CellId, IntervalId], float] = {}
    for f in parts:
        _check_same_schemes(first, f)
        for k, v in f.entries.items():
            entries[k] = entries.get(k, 0.0) + v
    return PseudoCountField(entries, first.sscheme, first.tscheme)


def coarsen_spatial(field: PseudoCountField, levels: int = 1) -> PseudoCountField:
    """Merge counts up the hierarchy: each parent gets the sum of its 4 children."""
    if levels < 1:
        raise InputError("levels must be >= 1")
    if field.sscheme.level - levels < 0:
        raise InputError("cannot coarsen below level 0")
    out = field
    for _ in range(levels):
        entries: dict[tuple[CellId, IntervalId], float] = {}
        for (cell, itv), v in out.entries.items():
            k = (parent_of(cell), itv)
            entries[k] = entries.get(k, 0.0) + v
        out = PseudoCountField(entries, out.sscheme.at_level(out.sscheme.level - 1), out.tscheme)
    return out


def coarsen_temporal(field: PseudoCountField, k: int) -> PseudoCountField:
    """Merge k adjacent intervals: the new interval gets the sum of its parts."""
    if k < 2:
        raise InputError("merge factor must be >= 2")
    entries: dict[tuple[CellId, IntervalId], float] = {}
    for (cell, itv), v in field.entries.items():
        key = (cell, IntervalId(itv.index // k))
        entries[key] = entries.get(key, 0.0) + v
    return PseudoCountField(entries, field.sscheme, field.tscheme.merged(k))


def baseline_probe_count(
    trajs: Sequence[Trajectory], ss: SpatialScheme, tsch: TemporalScheme
) -> PseudoCountField:
    """Rejected transform: raw probe tallies per partition (over-counts chatty devices)."""
    entries: dict[tuple[CellId, IntervalId], float] = {}
    lv = ss.level
    for traj in trajs:
        xs, ys = _project_and_check(traj, ss)
        ix, iy = ss.cell_indices(xs, ys)
        itv = tsch.interval_indices(traj.ts)
        for cx, cy, ct in zip(ix.tolist(), iy.tolist(), itv.tolist()):
            k = (CellId(cx, cy, lv), IntervalId(ct))
            entries[k] = entries.get(k, 0.0) + 1.0
    return PseudoCountField(entries, ss, tsch)


def baseline_trajectory_count(
    trajs: Sequence[Trajectory], ss: SpatialScheme, tsch: TemporalScheme
) -> PseudoCountField:
    """Rejected transform: each trajectory counted once in every partition it touches."""
    entries: dict[tuple[CellId, IntervalId], float] = {}
    lv = ss.level
    for traj in trajs:
        touched = _traj_dwell_seconds(traj, ss, tsch)
        if len(traj) == 1:
            # a single probe still touches its own partition
            xs, ys = _project_and_check(traj, ss)
            cell = ss.cell_of(float(xs[0]), float(ys[0]))
            touched = {(cell.ix, cell.iy, tsch.interval_of(int(traj.ts[0])).index): 0.0}
        for (cx, cy, ct) in touched:
            k = (CellId(cx, cy, lv), IntervalId(ct))
            entries[k] = entries.get(k, 0.0) + 1.0
    return PseudoCountField(entries, ss, tsch)
