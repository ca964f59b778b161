"""Pipeline command line: composable stages with file-based handoff.

Subcommands mirror the analysis pipeline: `synth` fabricates a world,
`transform` turns probes into pseudo-counts, `estimate` fuses counts with
a census prior, `correlate` and `cluster` analyze the results,
`export-geojson` and `report` publish them.

Exit codes: 2 for unreadable input, 3 for scheme mismatches between files.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, analytics, fileio, report
from .clustering import hdbscan_labels
from .errors import InputError, PopfluxError, SchemeMismatchError
from .estimator import EstimatorConfig, posterior_population
from .grid import CellId
from .ingest import PreprocessConfig, Trajectory, parse_probes, preprocess_all
from .prior import disaggregate, load_static_population
from .synth import census_of, generate_world, simulate_probes, true_occupancy
from .transform import dwell_field
from .util import resolve_threads

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNREADABLE = 2
EXIT_SCHEME_MISMATCH = 3


def _load_config(path: str | None) -> fileio.RunConfig:
    if path is None:
        return fileio.RunConfig()
    with open(path) as fh:
        return fileio.parse_config(fh)


def _open_input(path: str):
    try:
        return open(path, newline="")
    except OSError as e:
        raise _Unreadable(f"cannot read {path}: {e}")


class _Unreadable(Exception):
    pass


def _load_census(path: str, scheme):
    """Census prior from grid CSV or polygon GeoJSON (disaggregated on load)."""
    with _open_input(path) as fh:
        head = fh.read(1)
        fh.seek(0)
        if head == "{":
            zones = fileio.load_geojson_zones(fh, scheme.projection)
            return disaggregate(zones, scheme), []
        return load_static_population(fh, scheme)


def _drop_out_of_extent(trajs, scheme, strict):
    """Split trajectories at probes outside the extent; see --strict."""
    kept: list[Trajectory] = []
    dropped = 0
    for traj in trajs:
        xs, ys = scheme.projection.to_planar(traj.lon, traj.lat)
        inside = scheme.extent.contains_many(np.atleast_1d(xs), np.atleast_1d(ys))
        n_out = int((~inside).sum())
        if n_out == 0:
            kept.append(traj)
            continue
        if strict:
            raise InputError(f"trajectory {traj.id!r}: {n_out} probe(s) outside the extent")
        dropped += n_out
        idx = np.nonzero(inside)[0]
        if len(idx) == 0:
            continue
        # consecutive in-extent runs become separate pieces
        cuts = np.nonzero(np.diff(idx) > 1)[0] + 1
        for k, run in enumerate(np.split(idx, cuts)):
            if len(run) == 0:
                continue
            pid = traj.id if n_out == 0 else f"{traj.id}~{k}"
            kept.append(Trajectory(pid, traj.ts[run], traj.lon[run], traj.lat[run]))
    return kept, dropped


def cmd_transform(args) -> int:
    cfg = _load_config(args.config)
    ss = cfg.spatial_scheme()
    tsch = cfg.temporal_scheme()
    pre = PreprocessConfig(cfg.max_speed_mps, cfg.max_gap_s, cfg.min_probes)
    with _open_input(args.probes) as fh:
        trajs, rejects = parse_probes(fh)
    trajs.sort(key=lambda t: t.id)
    trajs, dropped = _drop_out_of_extent(trajs, ss, args.strict)
    pieces = preprocess_all(trajs, pre)
    field = dwell_field(pieces, ss, tsch, threads=resolve_threads(args.threads))
    with open(args.out, "w") as fh:
        fileio.write_counts(fh, field)
    if args.rejects:
        with open(args.rejects, "w") as fh:
            fileio.write_rejects(fh, rejects)
    print(f"trajectories: {len(trajs)} parsed, {len(pieces)} pieces after preprocessing")
    print(f"rejected rows: {len(rejects)}; out-of-extent probes dropped: {dropped}")
    print(f"total mass: {field.total_mass():.6f} device-hours -> {args.out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = _load_config(args.config)
    if args.lam is not None:
        cfg.lam = args.lam
    ss = cfg.spatial_scheme()
    tsch = cfg.temporal_scheme()
    with _open_input(args.counts) as fh:
        counts = fileio.read_counts(fh, ss, tsch)
    prior, rej = _load_census(args.census, ss)
    if rej:
        print(f"census: {len(rej)} row(s) rejected", file=sys.stderr)
    est = posterior_population(counts, prior, EstimatorConfig(lam=cfg.lam))
    with open(args.out, "w") as fh:
        fileio.write_estimates(fh, est, counts)
    n_int = len(est.interval_ids())
    print(f"estimated {n_int} interval(s) x {ss.n_cells} cells (lambda={cfg.lam}) -> {args.out}")
    return EXIT_OK


def cmd_correlate(args) -> int:
    cfg = _load_config(args.config)
    ss = cfg.spatial_scheme()
    tsch = cfg.temporal_scheme()
    with _open_input(args.counts) as fh:
        counts = fileio.read_counts(fh, ss, tsch)
    prior, _ = _load_census(args.census, ss)
    rho, skipped = analytics.per_interval_prior_correlation(counts, prior)
    with open(args.out, "w") as fh:
        fileio.write_rho(fh, rho, tsch)
    if skipped:
        idx = ", ".join(str(t.index) for t in skipped)
        print(f"skipped {len(skipped)} interval(s) with undefined correlation: {idx}", file=sys.stderr)
    print(f"correlated {len(rho)} interval(s) -> {args.out}")
    return EXIT_OK


def cmd_cluster(args) -> int:
    cfg = _load_config(args.config)
    if args.min_cluster_size is not None:
        cfg.min_cluster_size = args.min_cluster_size
    if args.min_samples is not None:
        cfg.min_samples = args.min_samples
    with _open_input(args.estimates) as fh:
        rows = fileio.read_estimates(fh)
    if not rows:
        raise InputError("estimates file has no rows")
    intervals = sorted({itv.index for _, itv, _, _ in rows})
    lo = intervals[0]
    n_t = intervals[-1] - lo + 1
    series: dict[CellId, np.ndarray] = {}
    for cell, itv, _count, pop in rows:
        vec = series.get(cell)
        if vec is None:
            vec = np.zeros(n_t)
            series[cell] = vec
        vec[itv.index - lo] = pop

    cells = sorted(series, key=lambda c: (c.iy, c.ix))
    usable = [c for c in cells if float(series[c].std()) > 0.0]
    constant = len(cells) - len(usable)
    labels: dict[CellId, int] = {c: -1 for c in cells}
    envelopes = {}
    if len(usable) >= 2:
        mat = analytics.dissimilarity_matrix([series[c] for c in usable])
        lab = hdbscan_labels(mat, cfg.min_cluster_size, cfg.min_samples)
        for c, l in zip(usable, lab.tolist()):
            labels[c] = l
        zseries = [
            analytics.CellTimeSeries(c, lo, analytics.zscore_values(series[c])) for c in usable
        ]
        envelopes = analytics.cluster_envelopes(labels, zseries)
    with open(args.out_clusters, "w") as fh:
        fileio.write_clusters(fh, labels)
    with open(args.out_envelopes, "w") as fh:
        fileio.write_envelopes(fh, envelopes, lo)
    n_clusters = len(envelopes)
    n_noise = sum(1 for l in labels.values() if l < 0)
    print(
        f"clustered {len(usable)} cells ({constant} constant excluded): "
        f"{n_clusters} cluster(s), {n_noise} noise -> {args.out_clusters}, {args.out_envelopes}"
    )
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _load_config(args.config)
    scfg = cfg.synth_config()
    ss = cfg.spatial_scheme()
    tsch = cfg.temporal_scheme()
    world = generate_world(scfg, ss)
    trajs = simulate_probes(world, scfg, ss, tsch)
    truth = true_occupancy(world, scfg, ss, tsch)
    census = census_of(world, ss)
    with open(args.out_probes, "w") as fh:
        fileio.write_probes(fh, trajs)
    with open(args.out_truth, "w") as fh:
        fileio.write_truth(fh, truth)
    with open(args.out_census, "w") as fh:
        fileio.write_census(fh, census)
    n_probes = sum(len(t) for t in trajs)
    print(
        f"synthesized {scfg.n_agents} agents, {len(trajs)} sessions, {n_probes} probes "
        f"-> {args.out_probes}, {args.out_truth}, {args.out_census}"
    )
    return EXIT_OK


def cmd_export_geojson(args) -> int:
    cfg = _load_config(args.config)
    ss = cfg.spatial_scheme()
    tsch = cfg.temporal_scheme()
    path = args.field
    values: dict[CellId, float] = {}
    with _open_input(path) as fh:
        head = fh.readline()
        while head.startswith("#"):
            head = fh.readline()
        header = [h.strip() for h in head.split(",")]
        fh.seek(0)
        if header == fileio.COUNTS_HEADER:
            field = fileio.read_counts(fh, ss, tsch)
            rows = [(c, t, v) for (c, t), v in field.entries.items()]
            per_interval = True
        elif header == fileio.ESTIMATES_HEADER:
            rows = [(c, t, pop) for c, t, _cnt, pop in fileio.read_estimates(fh)]
            per_interval = True
        elif header == fileio.TRUTH_HEADER:
            rows = [(c, t, v) for c, t, v in fileio.read_truth(fh)]
            per_interval = True
        elif header == fileio.CENSUS_HEADER:
            pop, _ = load_static_population(fh, ss)
            rows = [(c, None, v) for c, v in pop.values.items()]
            per_interval = False
        else:
            raise InputError(f"unrecognized field file header: {head.strip()!r}")
    if per_interval:
        if args.interval is None:
            raise InputError("--interval is required for per-interval fields")
        for c, t, v in rows:
            if t.index == args.interval:
                values[c] = v
    else:
        values = {c: v for c, _t, v in rows}
    doc = fileio.field_to_geojson(values, ss, args.interval if per_interval else None)
    import json

    text = json.dumps(doc, indent=None, separators=(",", ":"), sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {len(doc['features'])} features -> {args.out}")
    else:
        print(text)
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _load_config(args.config)
    ss = cfg.spatial_scheme()
    out_dir = Path(args.out_dir)
    made = []
    if args.counts:
        with _open_input(args.counts) as fh:
            field = fileio.read_counts(fh, ss, cfg.temporal_scheme())
        rows = [(c, t, v) for (c, t), v in field.entries.items()]
        made.append(report.save(report.fig_total_mass(rows, cfg.interval_len_s), out_dir / "total_mass.png"))
    if args.rho:
        with _open_input(args.rho) as fh:
            rho = fileio.read_rho(fh)
        made.append(report.save(report.fig_rho(rho, cfg.interval_len_s), out_dir / "spearman_by_interval.png"))
    if args.estimates:
        with _open_input(args.estimates) as fh:
            rows = fileio.read_estimates(fh)
        intervals = sorted({t.index for _, t, _, _ in rows})
        pick = args.interval if args.interval is not None else intervals[0]
        values = {c: pop for c, t, _cnt, pop in rows if t.index == pick}
        made.append(
            report.save(
                report.fig_population_map(values, ss, f"Estimated population, interval {pick}"),
                out_dir / f"population_map_{pick}.png",
            )
        )
    if args.clusters:
        with _open_input(args.clusters) as fh:
            labels = fileio.read_clusters(fh)
        made.append(report.save(report.fig_cluster_map(labels, ss), out_dir / "cluster_map.png"))
    if args.envelopes:
        with _open_input(args.envelopes) as fh:
            env = fileio.read_envelopes(fh)
        if env:
            made.append(
                report.save(report.fig_envelopes(env, cfg.interval_len_s), out_dir / "cluster_envelopes.png")
            )
    if not made:
        raise InputError("report: no inputs given (pass --counts/--rho/--estimates/--clusters/--envelopes)")
    for p in made:
        print(f"wrote {p}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="run config file (key = value lines)")
    common.add_argument("--strict", action="store_true", help="treat recoverable data issues as fatal")
    common.add_argument("--threads", type=int, default=1, help="worker threads; 0 = auto")

    p = argparse.ArgumentParser(prog="popflux", description=__doc__)
    p.add_argument("--version", action="version", version=f"popflux {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("transform", parents=[common], help="probes -> pseudo-count field")
    t.add_argument("probes", help="probe CSV input")
    t.add_argument("--out", required=True, help="counts CSV output")
    t.add_argument("--rejects", help="optional rejects report CSV")
    t.set_defaults(fn=cmd_transform)

    e = sub.add_parser("estimate", parents=[common], help="counts + census -> population estimates")
    e.add_argument("counts", help="counts CSV input")
    e.add_argument("census", help="census CSV input")
    e.add_argument("--lambda", dest="lam", type=float, help="prior balance factor")
    e.add_argument("--out", required=True, help="estimates CSV output")
    e.set_defaults(fn=cmd_estimate)

    c = sub.add_parser("correlate", parents=[common], help="per-interval Spearman(counts, census)")
    c.add_argument("counts")
    c.add_argument("census")
    c.add_argument("--out", required=True)
    c.set_defaults(fn=cmd_correlate)

    k = sub.add_parser("cluster", parents=[common], help="cluster per-cell time series")
    k.add_argument("estimates")
    k.add_argument("--min-cluster-size", type=int)
    k.add_argument("--min-samples", type=int)
    k.add_argument("--out-clusters", required=True)
    k.add_argument("--out-envelopes", required=True)
    k.set_defaults(fn=cmd_cluster)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic world")
    s.add_argument("--out-probes", required=True)
    s.add_argument("--out-truth", required=True)
    s.add_argument("--out-census", required=True)
    s.set_defaults(fn=cmd_synth)

    g = sub.add_parser("export-geojson", parents=[common], help="field CSV -> GeoJSON FeatureCollection")
    g.add_argument("field", help="counts/estimates/truth/census CSV")
    g.add_argument("--interval", type=int, help="interval index (per-interval fields)")
    g.add_argument("--out", help="output path (default: stdout)")
    g.set_defaults(fn=cmd_export_geojson)

    r = sub.add_parser("report", parents=[common], help="render figures from pipeline outputs")
    r.add_argument("--counts")
    r.add_argument("--rho")
    r.add_argument("--estimates")
    r.add_argument("--interval", type=int, help="interval for the population map")
    r.add_argument("--clusters")
    r.add_argument("--envelopes")
    r.add_argument("--out-dir", required=True)
    r.set_defaults(fn=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _Unreadable as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNREADABLE
    except SchemeMismatchError as e:
        print(f"error: scheme mismatch: {e}", file=sys.stderr)
        return EXIT_SCHEME_MISMATCH
    except PopfluxError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
