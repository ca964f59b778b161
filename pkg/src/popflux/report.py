"""Render figures from pipeline outputs, alongside the delimited files.

Each function draws one figure from already-parsed rows; `render_report`
writes the PNGs a run's outputs support into a directory.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .grid import CellId, SpatialScheme


def _hours(indices: list[int], interval_len_s: float) -> np.ndarray:
    return np.asarray(indices, dtype=float) * (interval_len_s / 3600.0)


def fig_total_mass(counts_rows, interval_len_s: float):
    """Total pseudo-count mass per interval (the day/night volume curve)."""
    totals: dict[int, float] = {}
    for cell, itv, value in counts_rows:
        totals[itv.index] = totals.get(itv.index, 0.0) + value
    idx = sorted(totals)
    fig, ax = plt.subplots(figsize=(9, 3.2))
    ax.plot(_hours(idx, interval_len_s), [totals[i] for i in idx], lw=1.2)
    ax.set_xlabel("hours since epoch")
    ax.set_ylabel("device-hours")
    ax.set_title("Total pseudo-counts per interval")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig

def fig_rho(rho_by_index: dict[int, float], interval_len_s: float):
    """Per-interval rank correlation between counts and the census prior."""
    idx = sorted(rho_by_index)
    fig, ax = plt.subplots(figsize=(9, 3.2))
    ax.plot(_hours(idx, interval_len_s), [rho_by_index[i] for i in idx], lw=1.2)
    ax.set_xlabel("hours since epoch")
    ax.set_ylabel("Spearman rho")
    ax.set_ylim(-1.05, 1.05)
    ax.set_title("Counts vs census prior, per interval")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def _grid_image(values: dict[CellId, float], scheme: SpatialScheme) -> np.ndarray:
    x0, x1 = scheme.ix_range
    y0, y1 = scheme.iy_range
    img = np.full((y1 - y0, x1 - x0), np.nan)
    for cell, v in values.items():
        img[cell.iy - y0, cell.ix - x0] = v
    return img


def fig_population_map(values: dict[CellId, float], scheme: SpatialScheme, title: str):
    """Heat map of one interval's per-cell values on the scheme grid."""
    img = _grid_image(values, scheme)
    fig, ax = plt.subplots(figsize=(5.5, 5))
    m = ax.imshow(img, origin="lower", cmap="viridis")
    fig.colorbar(m, ax=ax, shrink=0.85)
    ax.set_xlabel("cell ix")
    ax.set_ylabel("cell iy")
    ax.set_title(title)
    fig.tight_layout()
    return fig


def fig_cluster_map(labels: dict[CellId, int], scheme: SpatialScheme):
    """Cluster label map; noise cells in grey."""
    img = _grid_image({c: float(l) for c, l in labels.items()}, scheme)
    fig, ax = plt.subplots(figsize=(5.5, 5))
    masked = np.ma.masked_where(np.isnan(img) | (img < 0), img)
    cmap = plt.get_cmap("tab10").copy()
    cmap.set_bad(color="#cccccc")
    m = ax.imshow(masked, origin="lower", cmap=cmap, interpolation="nearest")
    fig.colorbar(m, ax=ax, shrink=0.85, label="cluster")
    ax.set_xlabel("cell ix")
    ax.set_ylabel("cell iy")
    ax.set_title("Population pattern clusters (grey = noise)")
    fig.tight_layout()
    return fig


def fig_envelopes(envelope_rows, interval_len_s: float):
    """Median z-score with p10-p90 band, one panel per cluster."""
    by_label: dict[int, list[tuple[int, float, float, float]]] = {}
    for label, itv, med, p10, p90 in envelope_rows:
        by_label.setdefault(label, []).append((itv, med, p10, p90))
    labels = sorted(by_label)
    fig, axes = plt.subplots(
        len(labels), 1, figsize=(9, 2.6 * max(1, len(labels))), sharex=True, squeeze=False
    )
    for ax, label in zip(axes[:, 0], labels):
        rows = sorted(by_label[label])
        h = _hours([r[0] for r in rows], interval_len_s)
        med = [r[1] for r in rows]
        lo = [r[2] for r in rows]
        hi = [r[3] for r in rows]
        ax.fill_between(h, lo, hi, alpha=0.3)
        ax.plot(h, med, lw=1.2)
        ax.set_ylabel("z-score")
        ax.set_title(f"cluster {label}")
        ax.grid(True, alpha=0.3)
    axes[-1, 0].set_xlabel("hours since epoch")
    fig.tight_layout()
    return fig


def save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
