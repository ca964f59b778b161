"""CSV interchange formats, the flat key=value run config, and GeoJSON export.

Every output carries a `#popflux-<version>,schema-<n>` comment line ahead
of the column header. Counts and populations are serialized with 9
significant digits so cross-language consumers can reproduce files byte
for byte.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, fields
from typing import IO, Iterable

from . import __version__
from .errors import InputError, SchemeMismatchError
from .estimator import PopulationField
from .grid import CellId, Extent, IntervalId, Projection, SpatialScheme, TemporalScheme
from .ingest import PROBE_HEADER, REJECT_HEADER, Reject, Trajectory
from .prior import SourceZone, StaticPopulation
from .synth import GroundTruthField, SynthConfig
from .transform import PseudoCountField

SCHEMA_VERSION = 1

COUNTS_HEADER = ["cell_ix", "cell_iy", "level", "interval_index", "count_device_hours"]
ESTIMATES_HEADER = [
    "cell_ix",
    "cell_iy",
    "level",
    "interval_index",
    "interval_start_ms",
    "pseudo_count_device_hours",
    "estimated_population",
]
TRUTH_HEADER = ["cell_ix", "cell_iy", "level", "interval_index", "true_population"]
RHO_HEADER = ["interval_index", "interval_start_ms", "spearman_rho"]
CLUSTERS_HEADER = ["cell_ix", "cell_iy", "level", "cluster_label"]
ENVELOPES_HEADER = ["cluster_label", "interval_index", "median_z", "p10_z", "p90_z"]
CENSUS_HEADER = ["cell_ix", "cell_iy", "level", "population"]


def _fmt(x: float) -> str:
    return "%.9g" % float(x)


def version_line() -> str:
    return f"#popflux-{__version__},schema-{SCHEMA_VERSION}"


def _write_csv(stream: IO[str], header: list[str], rows: Iterable[Iterable]) -> None:
    stream.write(version_line() + "\n")
    stream.write(",".join(header) + "\n")
    for row in rows:
        stream.write(",".join(str(v) for v in row) + "\n")


def _data_rows(stream: IO[str], expected_header: list[str], kind: str):
    reader = csv.reader(stream)
    header = None
    for row in reader:
        if row and row[0].startswith("#"):
            continue
        header = [h.strip() for h in row]
        break
    if header is None:
        raise InputError(f"{kind} file is empty")
    if header != expected_header:
        raise InputError(
            f"bad {kind} header: expected {','.join(expected_header)!r}, got {','.join(header)!r}"
        )
    for row in reader:
        if not row or row[0].startswith("#"):
            continue
        yield row


# --- pseudo-count fields ------------------------------------------------


def write_counts(stream: IO[str], field: PseudoCountField) -> None:
    keys = sorted(field.entries, key=lambda k: (k[1].index, k[0].iy, k[0].ix))
    rows = (
        (c.ix, c.iy, c.level, t.index, _fmt(field.entries[(c, t)])) for c, t in keys
    )
    _write_csv(stream, COUNTS_HEADER, rows)


def read_counts(
    stream: IO[str], sscheme: SpatialScheme, tscheme: TemporalScheme
) -> PseudoCountField:
    entries: dict[tuple[CellId, IntervalId], float] = {}
    for row in _data_rows(stream, COUNTS_HEADER, "counts"):
        ix, iy, lv, ti = int(row[0]), int(row[1]), int(row[2]), int(row[3])
        if lv != sscheme.level:
            raise SchemeMismatchError(
                f"counts file has level {lv}, configured scheme is level {sscheme.level}"
            )
        entries[(CellId(ix, iy, lv), IntervalId(ti))] = float(row[4])
    return PseudoCountField(entries, sscheme, tscheme)


# --- estimates ----------------------------------------------------------


def write_estimates(
    stream: IO[str], field: PopulationField, counts: PseudoCountField
) -> None:
    tsch = field.tscheme
    keys = sorted(field.population, key=lambda k: (k[1].index, k[0].iy, k[0].ix))
    rows = (
        (
            c.ix,
            c.iy,
            c.level,
            t.index,
            tsch.start_ms(t),
            _fmt(counts.value(c, t)),
            _fmt(field.population[(c, t)]),
        )
        for c, t in keys
    )
    _write_csv(stream, ESTIMATES_HEADER, rows)


def read_estimates(stream: IO[str]):
    """Rows of (CellId, IntervalId, count_device_hours, estimated_population)."""
    out = []
    for row in _data_rows(stream, ESTIMATES_HEADER, "estimates"):
        out.append(
            (
                CellId(int(row[0]), int(row[1]), int(row[2])),
                IntervalId(int(row[3])),
                float(row[5]),
                float(row[6]),
            )
        )
    return out


# --- ground truth -------------------------------------------------------


def write_truth(stream: IO[str], truth: GroundTruthField) -> None:
    keys = sorted(truth.entries, key=lambda k: (k[1].index, k[0].iy, k[0].ix))
    rows = (
        (c.ix, c.iy, c.level, t.index, _fmt(truth.entries[(c, t)])) for c, t in keys
    )
    _write_csv(stream, TRUTH_HEADER, rows)


def read_truth(stream: IO[str]):
    """Rows of (CellId, IntervalId, true_population)."""
    out = []
    for row in _data_rows(stream, TRUTH_HEADER, "truth"):
        out.append(
            (
                CellId(int(row[0]), int(row[1]), int(row[2])),
                IntervalId(int(row[3])),
                float(row[4]),
            )
        )
    return out


# --- analytics outputs --------------------------------------------------


def write_rho(stream: IO[str], rho: dict[IntervalId, float], tscheme: TemporalScheme) -> None:
    rows = (
        (t.index, tscheme.start_ms(t), _fmt(rho[t]))
        for t in sorted(rho, key=lambda i: i.index)
    )
    _write_csv(stream, RHO_HEADER, rows)


def read_rho(stream: IO[str]) -> dict[int, float]:
    return {
        int(row[0]): float(row[2]) for row in _data_rows(stream, RHO_HEADER, "rho")
    }


def write_clusters(stream: IO[str], labels: dict[CellId, int]) -> None:
    keys = sorted(labels, key=lambda c: (c.iy, c.ix))
    rows = ((c.ix, c.iy, c.level, labels[c]) for c in keys)
    _write_csv(stream, CLUSTERS_HEADER, rows)


def read_clusters(stream: IO[str]) -> dict[CellId, int]:
    return {
        CellId(int(r[0]), int(r[1]), int(r[2])): int(r[3])
        for r in _data_rows(stream, CLUSTERS_HEADER, "clusters")
    }


def write_envelopes(stream: IO[str], envelopes, start_index: int) -> None:
    rows = []
    for label in sorted(envelopes):
        env = envelopes[label]
        for i in range(len(env.median)):
            rows.append(
                (
                    label,
                    start_index + i,
                    _fmt(env.median[i]),
                    _fmt(env.p10[i]),
                    _fmt(env.p90[i]),
                )
            )
    _write_csv(stream, ENVELOPES_HEADER, rows)


def read_envelopes(stream: IO[str]):
    """Rows of (cluster_label, interval_index, median, p10, p90)."""
    return [
        (int(r[0]), int(r[1]), float(r[2]), float(r[3]), float(r[4]))
        for r in _data_rows(stream, ENVELOPES_HEADER, "envelopes")
    ]


# --- census and probes --------------------------------------------------


def write_census(stream: IO[str], pop: StaticPopulation) -> None:
    keys = sorted(pop.values, key=lambda c: (c.iy, c.ix))
    rows = ((c.ix, c.iy, c.level, _fmt(pop.values[c])) for c in keys)
    _write_csv(stream, CENSUS_HEADER, rows)


def write_probes(stream: IO[str], trajs: Iterable[Trajectory]) -> None:
    stream.write(version_line() + "\n")
    stream.write(",".join(PROBE_HEADER) + "\n")
    for traj in trajs:
        for t, lon, lat in zip(traj.ts, traj.lon, traj.lat):
            stream.write("%s,%d,%.12g,%.12g\n" % (traj.id, t, lon, lat))


def write_rejects(stream: IO[str], rejects: Iterable[Reject]) -> None:
    stream.write(version_line() + "\n")
    stream.write(",".join(REJECT_HEADER) + "\n")
    w = csv.writer(stream, lineterminator="\n")
    for r in rejects:
        padded = list(r.fields[:4]) + [""] * (4 - len(r.fields[:4]))
        w.writerow([*padded, r.line_no, r.reason])


# --- GeoJSON ------------------------------------------------------------


def load_geojson_zones(stream: IO[str], projection: Projection) -> list[SourceZone]:
    """Polygon FeatureCollection with a numeric `population` property per
    feature; coordinates are lon/lat and get projected on load."""
    doc = json.load(stream)
    if doc.get("type") != "FeatureCollection":
        raise InputError("expected a GeoJSON FeatureCollection")
    zones = []

    def ring_to_planar(ring):
        pts = [projection.to_planar(lon, lat) for lon, lat in ring]
        if len(pts) > 1 and pts[0] == pts[-1]:
            pts = pts[:-1]
        return tuple(pts)

    for fi, feat in enumerate(doc.get("features", [])):
        props = feat.get("properties") or {}
        if "population" not in props:
            raise InputError(f"feature {fi}: missing numeric `population` property")
        pop = float(props["population"])
        geom = feat.get("geometry") or {}
        gtype = geom.get("type")
        if gtype == "Polygon":
            rings = [geom["coordinates"]]
        elif gtype == "MultiPolygon":
            rings = geom["coordinates"]
        else:
            raise InputError(f"feature {fi}: unsupported geometry type {gtype!r}")
        polys = []
        for poly in rings:
            if len(poly) != 1:
                raise InputError(f"feature {fi}: polygons with holes are not supported")
            polys.append(ring_to_planar(poly[0]))
        if len(polys) == 1:
            zones.append(SourceZone(population=pop, polygon=polys[0]))
        else:
            # split the population across parts by area
            areas = [abs(_poly_area(p)) for p in polys]
            total = sum(areas)
            if total <= 0:
                raise InputError(f"feature {fi}: degenerate multipolygon")
            for p, a in zip(polys, areas):
                zones.append(SourceZone(population=pop * a / total, polygon=p))
    return zones


def _poly_area(ring) -> float:
    area = 0.0
    n = len(ring)
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        area += x0 * y1 - x1 * y0
    return 0.5 * area


def field_to_geojson(
    values: dict[CellId, float], scheme: SpatialScheme, interval_index: int | None = None
) -> dict:
    """FeatureCollection of cell polygons with a per-cell `value` property."""
    features = []
    for cell in sorted(values, key=lambda c: (c.iy, c.ix)):
        ring = [[round(lon, 9), round(lat, 9)] for lon, lat in scheme.cell_lonlat_ring(cell)]
        props = {
            "cell_ix": cell.ix,
            "cell_iy": cell.iy,
            "level": cell.level,
            "value": float(values[cell]),
        }
        if interval_index is not None:
            props["interval_index"] = interval_index
        features.append(
            {
                "type": "Feature",
                "properties": props,
                "geometry": {"type": "Polygon", "coordinates": [ring]},
            }
        )
    return {"type": "FeatureCollection", "features": features}


# --- run configuration --------------------------------------------------


@dataclass
class RunConfig:
    """Flat key=value run configuration; every field is validated up front."""

    # spatial/temporal scheme
    cell_size_m: float = 1000.0
    origin_x_m: float = 0.0
    origin_y_m: float = 0.0
    level: int = 0
    extent_w_m: float = 20_000.0
    extent_h_m: float = 20_000.0
    interval_len_s: float = 3600.0
    epoch_ms: int = 0
    ref_lat_deg: float = 0.0
    # preprocessing
    max_speed_mps: float = 70.0
    max_gap_s: float = 300.0
    min_probes: int = 2
    # estimator
    lam: float = 0.05
    # analytics
    min_cluster_size: int = 10
    min_samples: int = 5
    # synthetic world
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

    def spatial_scheme(self) -> SpatialScheme:
        ext = Extent(
            self.origin_x_m,
            self.origin_y_m,
            self.origin_x_m + self.extent_w_m,
            self.origin_y_m + self.extent_h_m,
        )
        return SpatialScheme(
            self.origin_x_m,
            self.origin_y_m,
            self.cell_size_m,
            self.level,
            ext,
            Projection(self.ref_lat_deg),
        )

    def temporal_scheme(self) -> TemporalScheme:
        return TemporalScheme(self.epoch_ms, self.interval_len_s)

    def synth_config(self) -> SynthConfig:
        return SynthConfig(
            n_agents=self.n_agents,
            seed=self.seed,
            coverage=self.coverage,
            probe_period_s_min=self.probe_period_s_min,
            probe_period_s_max=self.probe_period_s_max,
            session_max_s=self.session_max_s,
            work_start_h=self.work_start_h,
            work_end_h=self.work_end_h,
            jitter_s=self.jitter_s,
            speed_mps=self.speed_mps,
            days=self.days,
            work_fraction=self.work_fraction,
            emit_start_h=self.emit_start_h,
            emit_end_h=self.emit_end_h,
            night_owl_frac=self.night_owl_frac,
        )


_CONFIG_KEY_ALIASES = {"lambda": "lam"}
_INT_FIELDS = {"level", "epoch_ms", "min_probes", "min_cluster_size", "min_samples", "n_agents", "seed", "days"}


def parse_config(stream: IO[str]) -> RunConfig:
    """Parse `key = value` lines; `#` starts a comment; unknown keys fail."""
    known = {f.name for f in fields(RunConfig)}
    raw: dict[str, str] = {}
    for line_no, line in enumerate(stream, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"config line {line_no}: expected key = value")
        key, val = (part.strip() for part in line.split("=", 1))
        key = _CONFIG_KEY_ALIASES.get(key, key)
        if key not in known:
            raise InputError(f"config line {line_no}: unknown key {key!r}")
        if key in raw:
            raise InputError(f"config line {line_no}: duplicate key {key!r}")
        raw[key] = val
    kwargs = {}
    for key, val in raw.items():
        try:
            kwargs[key] = int(val) if key in _INT_FIELDS else float(val)
        except ValueError:
            raise InputError(f"config key {key!r}: unparseable number {val!r}")
    cfg = RunConfig(**kwargs)
    # validate eagerly: building the schemes runs every range check
    cfg.spatial_scheme()
    cfg.temporal_scheme()
    cfg.synth_config()
    if cfg.lam < 0:
        raise InputError("lambda must be >= 0")
    if cfg.min_cluster_size < 2 or cfg.min_samples < 1:
        raise InputError("min_cluster_size must be >= 2 and min_samples >= 1")
    return cfg


def config_text(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        name = "lambda" if f.name == "lam" else f.name
        lines.append(f"{name} = {getattr(cfg, f.name)}")
    return "\n".join(lines) + "\n"
