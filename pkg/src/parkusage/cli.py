"""Command-line entry point.

Every option can also come from a flat ``key=value`` file given with
``--config``; keys are option names with or without the leading dashes
(``min-cluster-size=120`` or ``min_cluster_size=120``).  Command-line flags
win over the file.  Repeated options such as ``exclude-app`` take a
comma-separated list in the file.
"""

import argparse
import dataclasses
import logging
import os
import sys

import numpy as np

from .exceptions import ParkUsageError, PipelineError
from .geo import project
from .hdbscan import HDBSCAN
from .ingest import (
    BoundaryPolygon,
    filter_accuracy,
    filter_apps,
    filter_boundary,
    parse_traces,
    summarize_apps,
    write_app_summary,
    write_traces,
)
from .pipeline import (
    PipelineConfig,
    cluster_geojson,
    compute_metrics,
    read_assignments,
    run_pipeline,
    write_assignments,
    write_geojson,
    write_histograms,
    write_metrics,
)
from .synth import SynthSpec, generate
from .trips import (
    DEFAULT_GAP_S,
    mode_segments,
    segment_trips,
    write_segments,
    write_trip_points,
    write_trips,
)

log = logging.getLogger("parkusage")

_LIST_OPTS = {"exclude_app", "input"}


def read_config(path):
    cfg = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParkUsageError(f"{path}:{lineno}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            k = k.lstrip("-").replace("-", "_")
            cfg[k] = [x.strip() for x in v.split(",") if x.strip()] if k in _LIST_OPTS else v
    return cfg


def _add_ingest_opts(p, boundary_required):
    p.add_argument("--input", action="append", required=False,
                   help="trace CSV (repeatable)")
    p.add_argument("--boundary", required=False,
                   help="GeoJSON polygon" + ("" if boundary_required else " (optional)"))
    p.add_argument("--exclude-app", action="append", dest="exclude_app", metavar="ID",
                   help="drop traces from this app (repeatable)")
    p.add_argument("--max-accuracy", type=float, default=None,
                   help="drop traces with a larger accuracy radius in meters")


def build_parser():
    parser = argparse.ArgumentParser(prog="parkusage", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value defaults file")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset with ground truth")
    p.add_argument("--spec", help="SynthSpec key=value file (defaults if omitted)")
    p.add_argument("--seed", type=int, help="override the SynthSpec seed")
    p.add_argument("--out", required=True)

    p = sub.add_parser("ingest", help="parse, boundary-filter and app-filter traces")
    _add_ingest_opts(p, False)
    p.add_argument("--out", required=True)

    p = sub.add_parser("trips", help="segment filtered traces into trips")
    p.add_argument("--input", action="append")
    p.add_argument("--gap-s", type=int, default=DEFAULT_GAP_S)
    p.add_argument("--out", required=True)

    p = sub.add_parser("cluster", help="HDBSCAN over filtered traces")
    p.add_argument("--input", action="append")
    p.add_argument("--min-pts", type=int, default=15)
    p.add_argument("--min-cluster-size", type=int, default=100)
    p.add_argument("--out", required=True)

    p = sub.add_parser("metrics", help="dwell times, shared experience and the log-log fit")
    p.add_argument("--assignments", required=True, help="clusters.csv from `cluster`")
    p.add_argument("--input", action="append", help="the filtered traces that were clustered")
    p.add_argument("--gap-s", type=int, default=DEFAULT_GAP_S)
    p.add_argument("--exclude-above", type=float, default=None)
    p.add_argument("--top-n", type=int, default=10)
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="mode and duration histograms")
    p.add_argument("--input", action="append", help="filtered traces")
    p.add_argument("--gap-s", type=int, default=DEFAULT_GAP_S)
    p.add_argument("--tz-offset", type=float, default=-4, dest="tz_offset")
    p.add_argument("--bin-width", type=float, default=5.0, dest="bin_width",
                   help="duration bin width in minutes")
    p.add_argument("--out", required=True)

    p = sub.add_parser("run", help="full pipeline")
    _add_ingest_opts(p, True)
    p.add_argument("--out", required=True)
    p.add_argument("--gap-s", type=int, default=DEFAULT_GAP_S)
    p.add_argument("--min-pts", type=int, default=15)
    p.add_argument("--min-cluster-size", type=int, default=100)
    p.add_argument("--tz-offset", type=float, default=-4, dest="tz_offset")
    p.add_argument("--exclude-above", type=float, default=None)
    p.add_argument("--bin-width", type=float, default=5.0, dest="bin_width")
    p.add_argument("--top-n", type=int, default=10)
    return parser, sub


def parse_args(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, sub = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        cfg = read_config(known.config)
        command = next((a for a in argv if a in sub.choices), None)
        if command is not None:
            sp = sub.choices[command]
            dests = {a.dest for a in sp._actions}
            unknown = set(cfg) - dests - {"config"}
            if unknown:
                parser.error(f"unknown config keys for {command}: {sorted(unknown)}")
            # list options must not be converted as a single string
            for k, v in cfg.items():
                if k in _LIST_OPTS:
                    sp.set_defaults(**{k: list(v)})
            sp.set_defaults(**{k: v for k, v in cfg.items() if k not in _LIST_OPTS})
    args = parser.parse_args(argv)
    for name in ("min_pts", "min_cluster_size", "gap_s", "top_n", "seed"):
        if isinstance(getattr(args, name, None), str):
            setattr(args, name, int(getattr(args, name)))
    for name in ("exclude_above", "tz_offset", "bin_width", "max_accuracy"):
        if isinstance(getattr(args, name, None), str):
            setattr(args, name, float(getattr(args, name)))
    return args


def _need_inputs(args):
    if not args.input:
        raise ParkUsageError("--input is required")
    return args.input


def _read_inputs(paths):
    out = []
    for p in paths:
        out.extend(parse_traces(p).records)
    return out


def cmd_synth(args):
    spec = SynthSpec.from_file(args.spec) if args.spec else SynthSpec()
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    rows, truth, _ = generate(spec, args.out)
    log.info("wrote %d traces (%d trips) to %s", len(rows), len(truth.trips), args.out)


def cmd_ingest(args):
    traces = _read_inputs(_need_inputs(args))
    if args.boundary:
        traces = filter_boundary(traces, BoundaryPolygon.from_geojson(args.boundary))
    os.makedirs(args.out, exist_ok=True)
    write_app_summary(os.path.join(args.out, "apps.csv"), summarize_apps(traces))
    traces = filter_accuracy(filter_apps(traces, args.exclude_app or ()), args.max_accuracy)
    write_traces(os.path.join(args.out, "traces_filtered.csv"), traces)


def cmd_trips(args):
    trips = segment_trips(_read_inputs(_need_inputs(args)), args.gap_s)
    os.makedirs(args.out, exist_ok=True)
    write_trips(os.path.join(args.out, "trips.csv"), trips)
    write_trip_points(os.path.join(args.out, "trip_points.csv"), trips)
    write_segments(os.path.join(args.out, "segments.csv"), mode_segments(trips))


def cmd_cluster(args):
    traces = _read_inputs(_need_inputs(args))
    est = HDBSCAN(min_cluster_size=args.min_cluster_size, min_pts=args.min_pts)
    labels = est.fit(project(traces)).labels_ if traces else np.empty(0, dtype=np.int64)
    stab = est.cluster_stabilities_ if traces else np.empty(0)
    os.makedirs(args.out, exist_ok=True)
    write_assignments(os.path.join(args.out, "clusters.csv"), traces, labels)
    write_geojson(os.path.join(args.out, "clusters.geojson"),
                  cluster_geojson(traces, labels, stab))


def cmd_metrics(args):
    traces = _read_inputs(_need_inputs(args))
    labels = read_assignments(args.assignments)
    if len(labels) != len(traces):
        raise ParkUsageError(f"{args.assignments} has {len(labels)} rows for "
                             f"{len(traces)} traces")
    trips = segment_trips(traces, args.gap_s)
    dwells, shared, summaries, fit, ranked, _ = compute_metrics(
        labels, trips, args.exclude_above, args.top_n)
    os.makedirs(args.out, exist_ok=True)
    write_metrics(args.out, dwells, shared, summaries, fit, ranked)


def cmd_report(args):
    trips = segment_trips(_read_inputs(_need_inputs(args)), args.gap_s)
    os.makedirs(args.out, exist_ok=True)
    write_histograms(args.out, mode_segments(trips), trips, args.tz_offset, args.bin_width)


def cmd_run(args):
    if not args.boundary:
        raise PipelineError("ingest", "--boundary is required")
    cfg = PipelineConfig(
        inputs=_need_inputs(args), boundary=args.boundary, out=args.out,
        exclude_apps=list(args.exclude_app or ()), gap_s=args.gap_s, min_pts=args.min_pts,
        min_cluster_size=args.min_cluster_size, exclude_above=args.exclude_above,
        tz_offset_h=args.tz_offset, bin_width_min=args.bin_width,
        max_accuracy=args.max_accuracy, top_n=args.top_n)
    manifest = dict(run_pipeline(cfg))
    log.info("run complete: %s clusters, %s trips", manifest["n_clusters"], manifest["n_trips"])


COMMANDS = {"synth": cmd_synth, "ingest": cmd_ingest, "trips": cmd_trips,
            "cluster": cmd_cluster, "metrics": cmd_metrics, "report": cmd_report,
            "run": cmd_run}


def main(argv=None):
    try:
        args = parse_args(argv)
    except (OSError, ParkUsageError) as exc:
        print(f"parkusage: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except PipelineError as exc:
        print(f"parkusage: error: {exc}", file=sys.stderr)
        return 1
    except (ParkUsageError, OSError, ValueError) as exc:
        print(f"parkusage: error: [{args.command}] {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
