"""Independent brute-force oracles used by the tests.

Each oracle deliberately avoids the code paths it checks: dwell times come
from dense time sampling rather than clipping, ranks and percentiles from
explicit loops rather than vectorized tricks, areas from point rasters
rather than closed-form overlap.
"""

from __future__ import annotations

import math

import numpy as np

from popflux.grid import SpatialScheme, TemporalScheme


def dwell_sampling_oracle(
    ts_ms: np.ndarray,
    xs: np.ndarray,
    ys: np.ndarray,
    ss: SpatialScheme,
    tsch: TemporalScheme,
    step_ms: float = 1.0,
) -> dict[tuple[int, int, int], float]:
    """Bin the polyline into partitions by sampling it every step_ms.

    Each sample instant contributes step_ms of dwell to the partition
    containing the position at that instant.
    """
    ts = np.asarray(ts_ms, dtype=float)
    t = np.arange(ts[0], ts[-1], step_ms)
    if len(t) == 0:
        return {}
    x = np.interp(t, ts, np.asarray(xs, dtype=float))
    y = np.interp(t, ts, np.asarray(ys, dtype=float))
    ix = np.floor((x - ss.origin_x) / ss.cell_size).astype(np.int64)
    iy = np.floor((y - ss.origin_y) / ss.cell_size).astype(np.int64)
    it = np.floor((t - tsch.epoch_ms) / tsch.interval_len_ms).astype(np.int64)
    ix0, iy0, it0 = ix.min(), iy.min(), it.min()
    nx = int(ix.max() - ix0) + 1
    ny = int(iy.max() - iy0) + 1
    packed = ((it - it0) * ny + (iy - iy0)) * nx + (ix - ix0)
    counts = np.bincount(packed)
    out = {}
    for key, cnt in enumerate(counts.tolist()):
        if cnt == 0:
            continue
        t_i, rem = divmod(key, nx * ny)
        y_i, x_i = divmod(rem, nx)
        out[(x_i + int(ix0), y_i + int(iy0), t_i + int(it0))] = cnt * step_ms / 1000.0
    return out


def rank_brute(values) -> list[float]:
    """Average ranks by definition: smaller values first, ties share the mean."""
    out = []
    for x in values:
        less = sum(1 for y in values if y < x)
        eq = sum(1 for y in values if y == x)
        out.append(less + (eq + 1) / 2.0)
    return out


def pearson_brute(x, y) -> float:
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def spearman_brute(x, y) -> float:
    return pearson_brute(rank_brute(x), rank_brute(y))


def percentile_brute(values, q: float) -> float:
    """Linear interpolation between closest ranks, by the sort definition."""
    v = sorted(values)
    n = len(v)
    h = (n - 1) * q / 100.0
    lo = math.floor(h)
    hi = min(lo + 1, n - 1)
    frac = h - lo
    return v[lo] * (1 - frac) + v[hi] * frac


def point_in_polygon(x: float, y: float, ring) -> bool:
    """Ray casting; boundary points are implementation-defined (avoid in tests)."""
    inside = False
    n = len(ring)
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        if (y0 > y) != (y1 > y):
            t = (y - y0) / (y1 - y0)
            if x < x0 + t * (x1 - x0):
                inside = not inside
    return inside


def rasterized_shares(
    ring, ss: SpatialScheme, step: float = 10.0
) -> dict[tuple[int, int], float]:
    """Per-cell share of a polygon's area from a point raster at `step` spacing."""
    xs = [p[0] for p in ring]
    ys = [p[1] for p in ring]
    gx = np.arange(min(xs) + step / 2, max(xs), step)
    gy = np.arange(min(ys) + step / 2, max(ys), step)
    counts: dict[tuple[int, int], int] = {}
    total = 0
    for y in gy:
        for x in gx:
            if point_in_polygon(float(x), float(y), ring):
                ix = math.floor((x - ss.origin_x) / ss.cell_size)
                iy = math.floor((y - ss.origin_y) / ss.cell_size)
                counts[(ix, iy)] = counts.get((ix, iy), 0) + 1
                total += 1
    return {k: v / total for k, v in counts.items()}


def occupancy_sampling_oracle(
    breakpoints, ss: SpatialScheme, tsch: TemporalScheme, step_s: float = 1.0
) -> dict[tuple[int, int, int], float]:
    """Time-averaged presence by 1-second sampling of true agent paths."""
    len_s = tsch.interval_len_ms / 1000.0
    acc: dict[tuple[int, int, int], float] = {}
    for t_s, xs, ys in breakpoints:
        t = np.arange(t_s[0], t_s[-1], step_s)
        x = np.interp(t, t_s, xs)
        y = np.interp(t, t_s, ys)
        ix = np.floor((x - ss.origin_x) / ss.cell_size).astype(np.int64)
        iy = np.floor((y - ss.origin_y) / ss.cell_size).astype(np.int64)
        # breakpoint times are run-relative seconds, so the epoch cancels
        it = np.floor(t * 1000.0 / tsch.interval_len_ms).astype(np.int64)
        for cx, cy, ct in zip(ix.tolist(), iy.tolist(), it.tolist()):
            k = (cx, cy, ct)
            acc[k] = acc.get(k, 0.0) + step_s / len_s
    return acc
