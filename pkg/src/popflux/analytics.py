"""Per-interval correlation against the prior, z-score series, the
sqrt(1 - Pearson) dissimilarity, and cluster percentile envelopes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConstantSeriesError, InputError
from .grid import CellId, IntervalId
from .prior import StaticPopulation
from .transform import PseudoCountField


@dataclass
class CellTimeSeries:
    """One value per interval for one cell, over a contiguous interval range."""

    cell: CellId
    start_index: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or len(self.values) < 1:
            raise InputError("series must be a non-empty 1-D vector")


@dataclass
class Envelope:
    median: np.ndarray
    p10: np.ndarray
    p90: np.ndarray


@dataclass
class ClusterResult:
    labels: dict[CellId, int]  # -1 = noise
    envelopes: dict[int, Envelope]


def rank_average(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties sharing their average rank."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="stable")
    sv = v[order]
    run_start = np.r_[True, sv[1:] != sv[:-1]]
    run_id = np.cumsum(run_start) - 1
    counts = np.bincount(run_id)
    starts = np.r_[0, np.cumsum(counts)[:-1]]
    avg = starts + (counts - 1) / 2.0 + 1.0
    ranks = np.empty(len(v))
    ranks[order] = avg[run_id]
    return ranks


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    yc = y - y.mean()
    nx = float(np.sqrt((xc * xc).sum()))
    ny = float(np.sqrt((yc * yc).sum()))
    if nx == 0.0 or ny == 0.0:
        raise ConstantSeriesError("correlation undefined for a constant vector")
    return float((xc * yc).sum() / (nx * ny))


def spearman(x, y) -> float:
    """Rank correlation: Pearson correlation of average ranks."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise InputError("spearman needs two equal-length vectors of length >= 2")
    return pearson(rank_average(x), rank_average(y))


def per_interval_prior_correlation(
    counts: PseudoCountField, prior: StaticPopulation
) -> tuple[dict[IntervalId, float], list[IntervalId]]:
    """Spearman(counts, prior) over all scheme cells, for each interval.

    Intervals where the correlation is undefined (constant counts) are
    skipped and returned separately.
    """
    if counts.sscheme != prior.scheme:
        raise InputError("counts and prior must share the spatial scheme")
    cells = list(counts.sscheme.cells())
    if len(cells) < 2:
        raise InputError("need at least 2 cells")
    b = prior.vector(cells)
    pos = {c: i for i, c in enumerate(cells)}

    by_interval: dict[IntervalId, np.ndarray] = {}
    for (cell, itv), v in counts.entries.items():
        vec = by_interval.get(itv)
        if vec is None:
            vec = np.zeros(len(cells))
            by_interval[itv] = vec
        vec[pos[cell]] = v

    rho: dict[IntervalId, float] = {}
    skipped: list[IntervalId] = []
    for itv in sorted(by_interval, key=lambda i: i.index):
        try:
            rho[itv] = spearman(by_interval[itv], b)
        except ConstantSeriesError:
            skipped.append(itv)
    return rho, skipped


def zscore_values(values: np.ndarray) -> np.ndarray:
    """(v - mean) / population sigma; constant input is an error."""
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        raise InputError("z-score needs at least 2 values")
    sigma = float(v.std())  # population convention (divide by n)
    if sigma == 0.0:
        raise ConstantSeriesError("z-score undefined for a constant series")
    return (v - v.mean()) / sigma


def zscore(series: CellTimeSeries) -> CellTimeSeries:
    return CellTimeSeries(series.cell, series.start_index, zscore_values(series.values))


def sqrt_pearson_dissimilarity(x, y) -> float:
    """sqrt(1 - Pearson correlation); 0 for perfectly correlated series."""
    r = pearson(x, y)
    return float(np.sqrt(min(2.0, max(0.0, 1.0 - r))))


def dissimilarity_matrix(series: Sequence[np.ndarray]) -> np.ndarray:
    """Pairwise sqrt(1 - rho) over z-scored rows, symmetric with zero diagonal."""
    if len(series) < 2:
        raise InputError("need at least 2 series")
    n_t = len(series[0])
    z = np.vstack([zscore_values(s) for s in series])
    rho = (z @ z.T) / n_t
    d2 = np.clip(1.0 - rho, 0.0, 2.0)
    d = np.sqrt(0.5 * (d2 + d2.T))
    np.fill_diagonal(d, 0.0)
    return d


def cluster_envelopes(
    labels: dict[CellId, int], series: Sequence[CellTimeSeries]
) -> dict[int, Envelope]:
    """Per-cluster (median, p10, p90) per interval, computed over member
    cells with linear interpolation between closest ranks. Noise cells are
    excluded; an empty cluster set yields an empty result."""
    groups: dict[int, list[np.ndarray]] = {}
    for s in series:
        label = labels.get(s.cell, -1)
        if label < 0:
            continue
        groups.setdefault(label, []).append(s.values)
    out: dict[int, Envelope] = {}
    for label in sorted(groups):
        mat = np.vstack(groups[label])
        p10, med, p90 = np.percentile(mat, [10.0, 50.0, 90.0], axis=0)
        out[label] = Envelope(median=med, p10=p10, p90=p90)
    return out
