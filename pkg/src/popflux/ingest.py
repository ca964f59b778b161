"""Probe file parsing and trajectory preprocessing (noise/outlier filters)."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, NamedTuple

import numpy as np

from .errors import InputError
from .grid import EARTH_RADIUS_M

PROBE_HEADER = ["trajectory_id", "timestamp_ms", "lon_deg", "lat_deg"]
REJECT_HEADER = PROBE_HEADER + ["line_no", "reason"]


class Probe(NamedTuple):
    ts: int
    lon: float
    lat: float


class Reject(NamedTuple):
    line_no: int
    fields: tuple[str, ...]
    reason: str


@dataclass
class Trajectory:
    """One pseudonymous session: strictly increasing timestamps, length >= 1.

    Positions are stored as parallel arrays; `probes` offers tuple access.
    """

    id: str
    ts: np.ndarray  # int64 epoch milliseconds UTC
    lon: np.ndarray  # float64 degrees
    lat: np.ndarray  # float64 degrees

    def __post_init__(self):
        self.ts = np.asarray(self.ts, dtype=np.int64)
        self.lon = np.asarray(self.lon, dtype=np.float64)
        self.lat = np.asarray(self.lat, dtype=np.float64)
        if not (len(self.ts) == len(self.lon) == len(self.lat)):
            raise InputError("trajectory arrays must have equal length")
        if len(self.ts) < 1:
            raise InputError("trajectory must contain at least one probe")
        if np.any(np.diff(self.ts) <= 0):
            raise InputError("trajectory timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.ts)

    @property
    def probes(self) -> list[Probe]:
        return [Probe(int(t), float(o), float(a)) for t, o, a in zip(self.ts, self.lon, self.lat)]

    @property
    def duration_ms(self) -> int:
        return int(self.ts[-1] - self.ts[0])


@dataclass(frozen=True)
class PreprocessConfig:
    max_speed_mps: float = 70.0
    max_gap_s: float = 300.0
    min_probes: int = 2

    def __post_init__(self):
        if self.max_speed_mps <= 0 or self.max_gap_s <= 0 or self.min_probes <= 0:
            raise InputError("preprocess parameters must all be positive")


def parse_probes(stream: IO[str]) -> tuple[list[Trajectory], list[Reject]]:
    """Parse probe CSV into per-session trajectories plus a rejects report.

    Probes are grouped by trajectory id and sorted by timestamp; duplicate
    (id, timestamp) rows keep the first occurrence. Malformed rows land in
    the rejects list with their line number; an unreadable header raises.
    """
    reader = csv.reader(stream)
    header = None
    for row in reader:
        if row and row[0].startswith("#"):
            continue
        header = [h.strip() for h in row]
        break
    if header is None:
        raise InputError("probe file is empty, expected header " + ",".join(PROBE_HEADER))
    if header != PROBE_HEADER:
        raise InputError(
            "unreadable probe header: expected %r, got %r" % (",".join(PROBE_HEADER), ",".join(header))
        )

    by_id: dict[str, list[tuple[int, float, float]]] = {}
    seen: set[tuple[str, int]] = set()
    rejects: list[Reject] = []
    for row in reader:
        line_no = reader.line_num
        if not row or row[0].startswith("#"):
            continue
        if len(row) != 4:
            rejects.append(Reject(line_no, tuple(row), "expected 4 fields"))
            continue
        tid = row[0].strip()
        try:
            ts = int(row[1])
            lon = float(row[2])
            lat = float(row[3])
        except ValueError:
            rejects.append(Reject(line_no, tuple(row), "unparseable number"))
            continue
        if not tid:
            rejects.append(Reject(line_no, tuple(row), "empty trajectory id"))
            continue
        if not (math.isfinite(lon) and math.isfinite(lat)):
            rejects.append(Reject(line_no, tuple(row), "non-finite coordinate"))
            continue
        if abs(lat) >= 90.0 or abs(lon) > 180.0:
            rejects.append(Reject(line_no, tuple(row), "coordinate out of range"))
            continue
        if (tid, ts) in seen:
            rejects.append(Reject(line_no, tuple(row), "duplicate (trajectory_id, timestamp_ms)"))
            continue
        seen.add((tid, ts))
        by_id.setdefault(tid, []).append((ts, lon, lat))

    trajectories = []
    for tid, rows in by_id.items():
        rows.sort(key=lambda r: r[0])
        arr = np.asarray(rows, dtype=np.float64)
        trajectories.append(
            Trajectory(tid, arr[:, 0].astype(np.int64), arr[:, 1], arr[:, 2])
        )
    return trajectories, rejects


def _step_meters(lon: np.ndarray, lat: np.ndarray) -> np.ndarray:
    """Distance between consecutive probes, local equirectangular approximation."""
    lat_rad = np.radians(lat)
    mid_cos = np.cos(0.5 * (lat_rad[1:] + lat_rad[:-1]))
    dx = EARTH_RADIUS_M * np.radians(np.diff(lon)) * mid_cos
    dy = EARTH_RADIUS_M * np.diff(lat_rad)
    return np.hypot(dx, dy)


def preprocess(traj: Trajectory, cfg: PreprocessConfig) -> list[Trajectory]:
    """Noise/outlier stage: speed filter, gap split, short-piece drop.

    A probe whose implied speed from the last kept probe exceeds
    max_speed_mps is dropped (the predecessor stays). The remainder is
    split wherever the inter-probe gap exceeds max_gap_s, and pieces
    shorter than min_probes are discarded. Output probes are always a
    subset of the input in original order.
    """
    ts, lon, lat = traj.ts, traj.lon, traj.lat
    n = len(ts)
    if n >= 2:
        dist = _step_meters(lon, lat)
        dt = np.diff(ts) / 1000.0
        if np.any(dist > cfg.max_speed_mps * dt):
            # sequential pass: speeds are relative to the last *kept* probe
            keep = [0]
            for i in range(1, n):
                j = keep[-1]
                dt_i = (ts[i] - ts[j]) / 1000.0
                d_i = float(_step_meters(lon[[j, i]], lat[[j, i]])[0])
                if d_i <= cfg.max_speed_mps * dt_i:
                    keep.append(i)
            idx = np.asarray(keep)
            ts, lon, lat = ts[idx], lon[idx], lat[idx]
            n = len(ts)

    # split where the gap exceeds max_gap_s
    if n >= 2:
        gaps = np.diff(ts) > cfg.max_gap_s * 1000.0
        cut_points = np.nonzero(gaps)[0] + 1
    else:
        cut_points = np.array([], dtype=int)
    bounds = [0, *cut_points.tolist(), n]

    pieces = []
    for start, stop in zip(bounds[:-1], bounds[1:]):
        if stop - start >= cfg.min_probes:
            pieces.append((start, stop))

    out = []
    for k, (start, stop) in enumerate(pieces):
        pid = traj.id if len(pieces) == 1 else f"{traj.id}#{k}"
        out.append(Trajectory(pid, ts[start:stop], lon[start:stop], lat[start:stop]))
    return out


def preprocess_all(trajs: Iterable[Trajectory], cfg: PreprocessConfig) -> list[Trajectory]:
    out: list[Trajectory] = []
    for t in trajs:
        out.extend(preprocess(t, cfg))
    return out
