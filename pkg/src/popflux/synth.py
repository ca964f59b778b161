"""Synthetic commuting world: agents, exact ground-truth occupancy, probes.

The generator replaces proprietary mobility feeds for validation. Each
agent lives at a home anchor drawn from a configurable per-cell prior and
(if a commuter) travels in a straight line to a downtown work anchor on a
jittered daily schedule. Ground truth is time-averaged person presence,
computed with the same clipping machinery as the dwell transform but on
the true continuous paths rather than sampled probes.

Devices sample the true path at a per-device probe period. Emission is
gated to an active-hours window (a small always-on fraction keeps the
night from going completely dark), mirroring the strong day/night volume
asymmetry of vehicle-centric probe data. Sessions are chopped at a
maximum duration and receive fresh opaque ids with no cross-session
linkage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .grid import CellId, IntervalId, SpatialScheme, TemporalScheme
from .ingest import Trajectory
from .prior import StaticPopulation
from .transform import polyline_dwell_seconds

DAY_S = 86_400.0


@dataclass(frozen=True)
class SynthConfig:
    n_agents: int = 1000
    seed: int = 0
    coverage: float = 0.3
    probe_period_s_min: float = 5.0
    probe_period_s_max: float = 60.0
    session_max_s: float = 600.0
    work_start_h: float = 9.0
    work_end_h: float = 17.0
    jitter_s: float = 900.0
    speed_mps: float = 12.0
    days: int = 7
    work_fraction: float = 0.4
    emit_start_h: float = 6.0
    emit_end_h: float = 22.0
    night_owl_frac: float = 0.04
    home_sigma_frac: float = 0.22
    work_sigma_frac: float = 0.06

    def __post_init__(self):
        if self.n_agents < 1:
            raise InputError("n_agents must be >= 1")
        if not (0.0 < self.coverage <= 1.0):
            raise InputError("coverage must be in (0, 1]")
        if not (0.0 < self.probe_period_s_min <= self.probe_period_s_max):
            raise InputError("probe period range must be positive and ordered")
        if self.session_max_s <= 0:
            raise InputError("session_max_s must be > 0")
        if not (0.0 <= self.work_start_h < self.work_end_h <= 24.0):
            raise InputError("work hours must satisfy 0 <= start < end <= 24")
        if self.jitter_s < 0:
            raise InputError("jitter_s must be >= 0")
        if self.speed_mps <= 0:
            raise InputError("speed_mps must be > 0")
        if self.days < 1:
            raise InputError("days must be >= 1")
        if not (0.0 <= self.work_fraction <= 1.0):
            raise InputError("work_fraction must be in [0, 1]")
        if not (0.0 <= self.emit_start_h < self.emit_end_h <= 24.0):
            raise InputError("emission window must satisfy 0 <= start < end <= 24")
        if not (0.0 <= self.night_owl_frac <= 1.0):
            raise InputError("night_owl_frac must be in [0, 1]")


@dataclass(frozen=True)
class Agent:
    index: int
    home_x: float
    home_y: float
    work_x: float
    work_y: float
    commuter: bool
    depart_home_s: tuple[float, ...]  # seconds-of-run, one per day
    depart_work_s: tuple[float, ...]
    speed_mps: float
    covered: bool
    night_owl: bool
    period_s: float
    phase_s: float

    @property
    def travel_s(self) -> float:
        return math.hypot(self.work_x - self.home_x, self.work_y - self.home_y) / self.speed_mps


@dataclass
class GroundTruthField:
    """Time-averaged person presence per partition (sums to n_agents per interval)."""

    entries: dict[tuple[CellId, IntervalId], float]
    sscheme: SpatialScheme
    tscheme: TemporalScheme

    def value(self, cell: CellId, interval: IntervalId) -> float:
        return self.entries.get((cell, interval), 0.0)


def radial_cell_weights(
    scheme: SpatialScheme, sigma_m: float, center: tuple[float, float] | None = None
) -> dict[CellId, float]:
    """Gaussian bump over cell centers, a simple city-like density prior."""
    ext = scheme.extent
    cx, cy = center if center else (0.5 * (ext.min_x + ext.max_x), 0.5 * (ext.min_y + ext.max_y))
    s = scheme.cell_size
    weights = {}
    for cell in scheme.cells():
        x = scheme.origin_x + (cell.ix + 0.5) * s
        y = scheme.origin_y + (cell.iy + 0.5) * s
        r2 = (x - cx) ** 2 + (y - cy) ** 2
        weights[cell] = math.exp(-0.5 * r2 / (sigma_m * sigma_m))
    return weights


def _agent_rng(seed: int, index: int) -> np.random.Generator:
    # per-agent substream: serial and parallel simulation agree exactly
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def generate_world(
    cfg: SynthConfig,
    scheme: SpatialScheme,
    home_weights: dict[CellId, float] | None = None,
) -> list[Agent]:
    """Deterministic world for a seed: anchors, schedules, device properties."""
    if home_weights is None:
        ext = scheme.extent
        span = min(ext.max_x - ext.min_x, ext.max_y - ext.min_y)
        home_weights = radial_cell_weights(scheme, cfg.home_sigma_frac * span)
    cells = [c for c, w in home_weights.items() if w > 0]
    if not cells:
        raise InputError("home prior distribution is empty")
    w = np.asarray([home_weights[c] for c in cells], dtype=float)
    cdf = np.cumsum(w / w.sum())

    ext = scheme.extent
    span = min(ext.max_x - ext.min_x, ext.max_y - ext.min_y)
    work_sigma = cfg.work_sigma_frac * span
    cx, cy = 0.5 * (ext.min_x + ext.max_x), 0.5 * (ext.min_y + ext.max_y)
    size = scheme.cell_size
    pad = 1e-6 * span

    agents = []
    for i in range(cfg.n_agents):
        rng = _agent_rng(cfg.seed, i)
        cell = cells[int(np.searchsorted(cdf, rng.random(), side="right"))]
        hx = scheme.origin_x + (cell.ix + rng.random()) * size
        hy = scheme.origin_y + (cell.iy + rng.random()) * size
        commuter = rng.random() < cfg.work_fraction
        wx = float(np.clip(cx + work_sigma * rng.standard_normal(), ext.min_x + pad, ext.max_x - pad))
        wy = float(np.clip(cy + work_sigma * rng.standard_normal(), ext.min_y + pad, ext.max_y - pad))
        if not commuter:
            wx, wy = hx, hy
        travel = math.hypot(wx - hx, wy - hy) / cfg.speed_mps

        depart_home = []
        depart_work = []
        for d in range(cfg.days):
            dh = d * DAY_S + cfg.work_start_h * 3600.0 + rng.uniform(-cfg.jitter_s, cfg.jitter_s)
            dw = d * DAY_S + cfg.work_end_h * 3600.0 + rng.uniform(-cfg.jitter_s, cfg.jitter_s)
            dw = max(dw, dh + travel + 60.0)  # stay at work at least a minute
            depart_home.append(dh)
            depart_work.append(dw)

        covered = rng.random() < cfg.coverage
        night_owl = covered and rng.random() < cfg.night_owl_frac
        period = rng.uniform(cfg.probe_period_s_min, cfg.probe_period_s_max)
        phase = rng.uniform(0.0, period)
        agents.append(
            Agent(
                index=i,
                home_x=hx,
                home_y=hy,
                work_x=wx,
                work_y=wy,
                commuter=commuter,
                depart_home_s=tuple(depart_home),
                depart_work_s=tuple(depart_work),
                speed_mps=cfg.speed_mps,
                covered=covered,
                night_owl=night_owl,
                period_s=period,
                phase_s=phase,
            )
        )
    return agents


def census_of(world: list[Agent], scheme: SpatialScheme) -> StaticPopulation:
    """Static prior for the synthetic world: one resident per agent, at home."""
    values: dict[CellId, float] = {}
    for a in world:
        cell = scheme.cell_of(a.home_x, a.home_y)
        values[cell] = values.get(cell, 0.0) + 1.0
    return StaticPopulation(values, scheme)


def agent_breakpoints(agent: Agent, cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Piecewise-linear true path over the whole run, as (t_s, x, y) arrays."""
    end = cfg.days * DAY_S
    t = [0.0]
    x = [agent.home_x]
    y = [agent.home_y]
    if agent.commuter and agent.travel_s > 0:
        for dh, dw in zip(agent.depart_home_s, agent.depart_work_s):
            t.extend([dh, dh + agent.travel_s, dw, dw + agent.travel_s])
            x.extend([agent.home_x, agent.work_x, agent.work_x, agent.home_x])
            y.extend([agent.home_y, agent.work_y, agent.work_y, agent.home_y])
    t.append(end)
    x.append(agent.home_x)
    y.append(agent.home_y)
    return np.asarray(t), np.asarray(x), np.asarray(y)


def true_occupancy(
    world: list[Agent],
    cfg: SynthConfig,
    sscheme: SpatialScheme,
    tscheme: TemporalScheme,
) -> GroundTruthField:
    """Exact time-averaged presence per partition over the run."""
    len_s = tscheme.interval_len_ms / 1000.0
    acc: dict[tuple[int, int, int], float] = {}
    for agent in world:
        t_s, xs, ys = agent_breakpoints(agent, cfg)
        ts_ms = tscheme.epoch_ms + t_s * 1000.0
        for k, v in polyline_dwell_seconds(ts_ms, xs, ys, sscheme, tscheme).items():
            acc[k] = acc.get(k, 0.0) + v
    lv = sscheme.level
    entries = {
        (CellId(cx, cy, lv), IntervalId(ct)): dwell / len_s
        for (cx, cy, ct), dwell in acc.items()
    }
    return GroundTruthField(entries, sscheme, tscheme)


def _emission_times_s(agent: Agent, cfg: SynthConfig) -> np.ndarray:
    """Probe emission instants (seconds of run) for one covered device."""
    end = cfg.days * DAY_S
    if agent.night_owl:
        return np.arange(agent.phase_s, end, agent.period_s)
    parts = []
    w0 = cfg.emit_start_h * 3600.0
    w1 = cfg.emit_end_h * 3600.0
    for d in range(cfg.days):
        t0 = d * DAY_S + w0 + agent.phase_s
        t1 = d * DAY_S + w1
        if t0 < t1:
            parts.append(np.arange(t0, t1, agent.period_s))
    if not parts:
        return np.empty(0)
    return np.concatenate(parts)


def simulate_probes(
    world: list[Agent], cfg: SynthConfig, sscheme: SpatialScheme, tscheme: TemporalScheme
) -> list[Trajectory]:
    """Sample true paths into chopped, pseudonymous probe sessions."""
    out: list[Trajectory] = []
    proj = sscheme.projection
    for agent in world:
        if not agent.covered:
            continue
        times = _emission_times_s(agent, cfg)
        if len(times) == 0:
            continue
        # positions are evaluated at the rounded (whole-ms) probe instants
        ts_ms = np.round(tscheme.epoch_ms + times * 1000.0).astype(np.int64)
        ts_ms = np.unique(ts_ms)
        t_s = (ts_ms - tscheme.epoch_ms) / 1000.0
        bp_t, bp_x, bp_y = agent_breakpoints(agent, cfg)
        xs = np.interp(t_s, bp_t, bp_x)
        ys = np.interp(t_s, bp_t, bp_y)
        lon, lat = proj.to_lonlat(xs, ys)

        rng = _agent_rng(cfg.seed, agent.index)
        rng = np.random.default_rng(rng.integers(0, 2**63))  # id stream, decoupled
        chop_ms = cfg.session_max_s * 1000.0
        start = 0
        t0 = ts_ms[0]
        for i in range(1, len(ts_ms) + 1):
            if i == len(ts_ms) or ts_ms[i] - t0 >= chop_ms:
                sid = rng.bytes(8).hex()
                out.append(Trajectory(sid, ts_ms[start:i], lon[start:i], lat[start:i]))
                if i < len(ts_ms):
                    start = i
                    t0 = ts_ms[i]
    return out
