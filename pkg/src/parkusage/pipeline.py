"""End-to-end batch run: ingest, trips, clustering, metrics and report files."""

import csv
import hashlib
import json
import logging
import os
import shutil
import tempfile
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .exceptions import ConfigError, FitError, FormatError, ParkUsageError, PipelineError
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
from .metrics import (
    cluster_summaries,
    dwell_records,
    exclusion_threshold,
    loglog_fit,
    shared_fractions,
    top_shared,
    write_dwells,
    write_shared,
    write_summaries,
    write_top_shared,
)
from .report import duration_histogram, mode_histograms
from .trips import (
    DEFAULT_GAP_S,
    mode_segments,
    segment_trips,
    write_segments,
    write_trip_points,
    write_trips,
)

logger = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    inputs: list
    boundary: str
    out: str
    exclude_apps: list = field(default_factory=list)
    gap_s: int = DEFAULT_GAP_S
    min_pts: int = 15
    min_cluster_size: int = 100
    exclude_above: float = None
    tz_offset_h: float = -4
    bin_width_min: float = 5.0
    max_accuracy: float = None
    top_n: int = 10

    def validate(self):
        if not self.inputs:
            raise ConfigError("at least one input trace file is required")
        if self.gap_s <= 0:
            raise ConfigError("gap_s must be positive")
        if self.min_pts < 1 or self.min_cluster_size < 2:
            raise ConfigError("need min_pts >= 1 and min_cluster_size >= 2")
        if self.exclude_above is not None and self.exclude_above < 0:
            raise ConfigError("exclude_above must be non-negative")
        if not -12 <= self.tz_offset_h <= 14:
            raise ConfigError("tz_offset_h must lie in [-12, 14]")
        if not self.bin_width_min > 0 or self.top_n < 1:
            raise ConfigError("bin_width_min must be positive and top_n >= 1")


# -- cluster output files -------------------------------------------------------

def convex_hull(points):
    """Counter-clockwise hull of ``(x, y)`` pairs (monotone chain), no repeated end."""
    pts = sorted(set(map(tuple, points)))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def write_assignments(path, traces, labels):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("point_index", "user_id", "timestamp", "cluster_label"))
        for i, (t, k) in enumerate(zip(traces, labels)):
            w.writerow((i, t.user_id, t.timestamp, int(k)))


def read_assignments(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if "cluster_label" not in (reader.fieldnames or ()):
            raise FormatError(f"{path}: no cluster_label column")
        try:
            return np.array([int(r["cluster_label"]) for r in reader], dtype=np.int64)
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{path}: bad cluster label ({exc})") from None


def cluster_geojson(traces, labels, stabilities):
    labels = np.asarray(labels)
    feats = []
    for k in range(len(stabilities)):
        idx = np.flatnonzero(labels == k)
        hull = convex_hull([(traces[i].lon, traces[i].lat) for i in idx])
        if len(hull) >= 3:
            geom = {"type": "Polygon", "coordinates": [[list(p) for p in hull + hull[:1]]]}
        elif len(hull) == 2:
            geom = {"type": "LineString", "coordinates": [list(p) for p in hull]}
        else:
            geom = {"type": "Point", "coordinates": list(hull[0])}
        feats.append({"type": "Feature", "geometry": geom,
                      "properties": {"cluster_id": k, "size": int(len(idx)),
                                     "stability": float(stabilities[k])}})
    return {"type": "FeatureCollection", "features": feats}


def write_geojson(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def write_manifest(path, items):
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in items:
            fh.write(f"{k}={v}\n")


def read_manifest(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if "=" in line:
                k, v = line.rstrip("\n").split("=", 1)
                out[k] = v
    return out


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# -- stages -------------------------------------------------------------------

def _stage(name):
    def wrap(fn):
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                out = fn(*args, **kwargs)
            except PipelineError:
                raise
            except (ParkUsageError, OSError, ValueError) as exc:
                raise PipelineError(name, str(exc)) from exc
            logger.info("stage %s done in %.2f s", name, time.perf_counter() - t0)
            return out
        return run
    return wrap


@_stage("ingest")
def _ingest(cfg, stage_dir, manifest):
    try:
        boundary = BoundaryPolygon.from_geojson(cfg.boundary)
    except ConfigError as exc:
        raise PipelineError("ingest", f"boundary: {exc}") from exc
    traces, rejected = [], 0
    for path in cfg.inputs:
        parsed = parse_traces(path)
        traces.extend(parsed.records)
        rejected += parsed.rejected
    manifest.append(("n_parsed", len(traces)))
    manifest.append(("n_rejected_lines", rejected))
    inside = filter_boundary(traces, boundary)
    manifest.append(("n_in_boundary", len(inside)))
    write_app_summary(os.path.join(stage_dir, "apps.csv"), summarize_apps(inside))
    kept = filter_apps(inside, cfg.exclude_apps)
    manifest.append(("n_app_filtered", len(kept)))
    kept = filter_accuracy(kept, cfg.max_accuracy)
    manifest.append(("n_accuracy_filtered", len(kept)))
    write_traces(os.path.join(stage_dir, "traces_filtered.csv"), kept)
    return kept


@_stage("trips")
def _trips(cfg, traces, stage_dir, manifest):
    trips = segment_trips(traces, cfg.gap_s)
    segs = mode_segments(trips)
    write_trips(os.path.join(stage_dir, "trips.csv"), trips)
    write_trip_points(os.path.join(stage_dir, "trip_points.csv"), trips)
    write_segments(os.path.join(stage_dir, "segments.csv"), segs)
    manifest.append(("n_trips", len(trips)))
    manifest.append(("n_segments", len(segs)))
    return trips, segs


@_stage("cluster")
def _cluster(cfg, traces, stage_dir, manifest):
    if traces:
        est = HDBSCAN(min_cluster_size=cfg.min_cluster_size, min_pts=cfg.min_pts)
        est.fit(project(traces))
        labels, stab = est.labels_, est.cluster_stabilities_
    else:
        labels, stab = np.empty(0, dtype=np.int64), np.empty(0)
    write_assignments(os.path.join(stage_dir, "clusters.csv"), traces, labels)
    write_geojson(os.path.join(stage_dir, "clusters.geojson"),
                  cluster_geojson(traces, labels, stab))
    manifest.append(("n_clusters", len(stab)))
    manifest.append(("n_noise", int((labels < 0).sum())))
    return labels


def compute_metrics(labels, trips, exclude_above=None, top_n=10):
    """Dwell, shared and summary tables plus the fit (or the FitError) and ranking."""
    dwells = dwell_records(labels, trips)
    shared = shared_fractions(dwells)
    if exclude_above is None:
        _, counts = np.unique(np.asarray(labels)[np.asarray(labels) >= 0], return_counts=True)
        exclude_above = exclusion_threshold(counts)
    summaries = cluster_summaries(dwells, shared, labels, exclude_above)
    try:
        fit = loglog_fit(summaries)
    except FitError as exc:
        fit = exc
    return dwells, shared, summaries, fit, top_shared(summaries, top_n), exclude_above


def write_metrics(stage_dir, dwells, shared, summaries, fit, ranked):
    write_dwells(os.path.join(stage_dir, "dwell.csv"), dwells)
    write_shared(os.path.join(stage_dir, "shared.csv"), shared)
    write_summaries(os.path.join(stage_dir, "summary.csv"), summaries)
    write_top_shared(os.path.join(stage_dir, "top_shared.csv"), ranked)
    with open(os.path.join(stage_dir, "fit.txt"), "w", encoding="utf-8") as fh:
        if isinstance(fit, FitError):
            n_used = sum(1 for s in summaries if not s.excluded
                         and s.n_trips > 0 and s.avg_shared > 0)
            n_dropped = sum(1 for s in summaries if not s.excluded) - n_used
            fh.write(f"slope=nan intercept=nan r2=nan n_used={n_used} "
                     f"n_dropped={n_dropped}\n")
        else:
            fh.write(f"{fit}\n")


@_stage("metrics")
def _metrics(cfg, labels, trips, stage_dir, manifest):
    dwells, shared, summaries, fit, ranked, thr = compute_metrics(
        labels, trips, cfg.exclude_above, cfg.top_n)
    write_metrics(stage_dir, dwells, shared, summaries, fit, ranked)
    manifest.append(("n_dwell_records", len(dwells)))
    manifest.append(("n_summaries", len(summaries)))
    manifest.append(("exclude_above_effective", f"{thr:g}"))
    manifest.append(("n_excluded_clusters", sum(s.excluded for s in summaries)))
    if isinstance(fit, FitError):
        logger.warning("log-log fit skipped: %s", fit)
        manifest.append(("fit_status", "insufficient_data"))
    else:
        manifest.append(("fit_status", "ok"))
        manifest.append(("fit_slope", f"{fit.slope:.12g}"))


def write_histograms(stage_dir, segs, trips, tz_offset_h, bin_width_min):
    hists = mode_histograms(segs, tz_offset_h)
    hists["hourly"].write_csv(os.path.join(stage_dir, "hist_hourly.csv"))
    hists["weekly"].write_csv(os.path.join(stage_dir, "hist_weekly.csv"))
    dur = duration_histogram(trips, bin_width_min)
    dur.write_csv(os.path.join(stage_dir, "hist_duration.csv"))
    return dur


@_stage("report")
def _report(cfg, segs, trips, stage_dir, manifest):
    dur = write_histograms(stage_dir, segs, trips, cfg.tz_offset_h, cfg.bin_width_min)
    manifest.append(("median_trip_duration_min", f"{dur.properties['median_min']:.6g}"))


def run_pipeline(cfg):
    """Run every stage and write all output files plus ``manifest.txt`` to ``cfg.out``.

    Files are produced in a staging directory and moved into place only when
    every stage succeeded, so a failed run leaves no partial outputs.  Returns
    the manifest as an ordered list of ``(key, value)`` pairs.

    Raises
    ------
    PipelineError
        Tagged with the stage that failed.
    """
    try:
        cfg.validate()
    except ConfigError as exc:
        raise PipelineError("config", str(exc)) from exc
    if not os.path.exists(cfg.boundary):
        raise PipelineError("ingest", f"boundary file not found: {cfg.boundary}")
    for p in cfg.inputs:
        if not os.path.exists(p):
            raise PipelineError("ingest", f"input file not found: {p}")

    os.makedirs(cfg.out, exist_ok=True)
    stage_dir = tempfile.mkdtemp(prefix=".partial-", dir=cfg.out)
    params = asdict(cfg)
    manifest = [("tool_version", __version__)]
    for key in ("gap_s", "min_pts", "min_cluster_size", "exclude_above", "tz_offset_h",
                "bin_width_min", "max_accuracy", "top_n"):
        manifest.append((key, params[key]))
    manifest.append(("exclude_apps", ",".join(sorted(cfg.exclude_apps))))
    for i, p in enumerate(cfg.inputs):
        manifest.append((f"input_{i}_sha256", file_digest(p)))
    manifest.append(("boundary_sha256", file_digest(cfg.boundary)))
    try:
        traces = _ingest(cfg, stage_dir, manifest)
        trips, segs = _trips(cfg, traces, stage_dir, manifest)
        labels = _cluster(cfg, traces, stage_dir, manifest)
        _metrics(cfg, labels, trips, stage_dir, manifest)
        _report(cfg, segs, trips, stage_dir, manifest)
        write_manifest(os.path.join(stage_dir, "manifest.txt"), manifest)
        for name in sorted(os.listdir(stage_dir)):
            os.replace(os.path.join(stage_dir, name), os.path.join(cfg.out, name))
    finally:
        shutil.rmtree(stage_dir, ignore_errors=True)
    return manifest
