"""Reading raw trace dumps and the first filtering passes over them."""

import csv
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import ConfigError, FormatError, InputError

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("user_id", "timestamp", "lat", "lon", "accuracy", "app_id")

# above this share of rejected lines the file is assumed to be the wrong kind
MAX_REJECTED_SHARE = 0.5


class TraceRecord(NamedTuple):
    """One GPS ping of one user reported by one app."""

    user_id: str
    timestamp: int
    lat: float
    lon: float
    accuracy: float
    app_id: str


class ParsedTraces(NamedTuple):
    records: list
    rejected: int


class AppSummary(NamedTuple):
    app_id: str
    count: int
    avg_accuracy: float
    accuracy_std: float


def _parse_row(row, pos):
    if len(row) != len(TRACE_COLUMNS):
        return None
    try:
        user = row[pos["user_id"]].strip()
        app = row[pos["app_id"]].strip()
        ts = int(row[pos["timestamp"]])
        lat = float(row[pos["lat"]])
        lon = float(row[pos["lon"]])
        acc = float(row[pos["accuracy"]])
    except ValueError:
        return None
    if not user or not app or ts <= 0:
        return None
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        return None
    if not (acc >= 0.0 and math.isfinite(acc)):
        return None
    return TraceRecord(user, ts, lat, lon, acc, app)


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        try:
            return open(source, "r", encoding="utf-8", newline=""), True
        except OSError as exc:
            raise InputError(f"cannot read trace file {source}: {exc}") from exc
    if isinstance(source, io.TextIOBase):
        return source, False
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), False


def parse_traces(source):
    """Parse a trace CSV into :class:`TraceRecord` objects.

    ``source`` is a path or an open binary/text stream.  The header row names
    the six columns in :data:`TRACE_COLUMNS` (any order).  Lines that do not
    parse or violate the record invariants are skipped and counted.

    Raises
    ------
    InputError
        The source cannot be opened or decoded.
    FormatError
        The header is missing columns, or more than half of the lines are bad.
    """
    fh, owned = _open_text(source)
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader, None)
        except UnicodeDecodeError as exc:
            raise InputError(f"trace source is not UTF-8: {exc}") from exc
        if header is None:
            raise FormatError("trace source is empty (no header line)")
        header = [h.strip() for h in header]
        missing = [c for c in TRACE_COLUMNS if c not in header]
        if missing:
            raise FormatError(f"trace header lacks columns {missing}")
        pos = {c: header.index(c) for c in TRACE_COLUMNS}

        records = []
        rejected = 0
        try:
            for row in reader:
                if not row:
                    continue
                rec = _parse_row(row, pos)
                if rec is None:
                    rejected += 1
                else:
                    records.append(rec)
        except UnicodeDecodeError as exc:
            raise InputError(f"trace source is not UTF-8: {exc}") from exc
    finally:
        if owned:
            fh.close()

    total = len(records) + rejected
    if total and rejected / total > MAX_REJECTED_SHARE:
        raise FormatError(f"{rejected} of {total} trace lines are malformed")
    if rejected:
        logger.warning("skipped %d malformed trace lines of %d", rejected, total)
    return ParsedTraces(records, rejected)


def write_traces(path, traces):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for t in traces:
            w.writerow((t.user_id, t.timestamp, repr(t.lat), repr(t.lon),
                        repr(t.accuracy), t.app_id))


# -- boundary -----------------------------------------------------------------

def _segments_cross(p1, p2, q1, q2):
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 0) - (v < 0)

    def on_seg(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and on_seg(p1, p2, q1)) or (o2 == 0 and on_seg(p1, p2, q2))
            or (o3 == 0 and on_seg(q1, q2, p1)) or (o4 == 0 and on_seg(q1, q2, p2)))


def _check_ring(ring, name):
    if len(ring) < 4 or ring[0] != ring[-1]:
        raise ConfigError(f"{name} ring must be closed (first vertex == last)")
    if len(set(ring[:-1])) < 3:
        raise ConfigError(f"{name} ring needs at least 3 distinct vertices")
    edges = list(zip(ring[:-1], ring[1:]))
    m = len(edges)
    for i in range(m):
        for j in range(i + 2, m):
            if i == 0 and j == m - 1:
                continue  # closing edge shares a vertex with the first
            if _segments_cross(*edges[i], *edges[j]):
                raise ConfigError(f"{name} ring is self-intersecting")


@dataclass(frozen=True)
class BoundaryPolygon:
    """Closed polygon in ``(lat, lon)`` degrees with optional holes."""

    exterior: tuple
    holes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        ext = tuple((float(a), float(b)) for a, b in self.exterior)
        holes = tuple(tuple((float(a), float(b)) for a, b in h) for h in self.holes)
        object.__setattr__(self, "exterior", ext)
        object.__setattr__(self, "holes", holes)
        _check_ring(ext, "exterior")
        for k, h in enumerate(holes):
            _check_ring(h, f"hole {k}")

    @classmethod
    def from_geojson(cls, obj):
        """Build from a GeoJSON Polygon, Feature or single-feature collection.

        ``obj`` may be a path or an already-decoded mapping.  GeoJSON
        positions are ``[lon, lat]``; the first ring is the exterior.
        """
        if isinstance(obj, (str, os.PathLike)):
            try:
                with open(obj, encoding="utf-8") as fh:
                    obj = json.load(fh)
            except OSError as exc:
                raise ConfigError(f"cannot read boundary file {obj}: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"boundary file is not valid JSON: {exc}") from exc
        if obj.get("type") == "FeatureCollection":
            feats = obj.get("features", [])
            if len(feats) != 1:
                raise ConfigError("boundary collection must hold exactly one feature")
            obj = feats[0]
        if obj.get("type") == "Feature":
            obj = obj.get("geometry") or {}
        if obj.get("type") != "Polygon":
            raise ConfigError(f"boundary geometry must be a Polygon, got {obj.get('type')}")
        rings = obj.get("coordinates") or []
        if not rings:
            raise ConfigError("boundary polygon has no rings")
        to_latlon = [[(p[1], p[0]) for p in ring] for ring in rings]
        return cls(to_latlon[0], tuple(to_latlon[1:]))

    def to_geojson(self):
        rings = [self.exterior, *self.holes]
        return {"type": "Polygon",
                "coordinates": [[[lon, lat] for lat, lon in ring] for ring in rings]}

    def contains(self, lat, lon):
        """Vectorised membership test; edges and vertices count as inside."""
        lat = np.asarray(lat, dtype=float)
        lon = np.asarray(lon, dtype=float)
        inside, on_edge = _ring_test(self.exterior, lat, lon)
        keep = inside | on_edge
        for hole in self.holes:
            h_in, h_edge = _ring_test(hole, lat, lon)
            keep &= ~h_in | h_edge
        return keep


def _ring_test(ring, y, x):
    """Even-odd crossing test of points ``(x=lon, y=lat)`` against one ring.

    Returns ``(strictly_inside_by_parity, on_boundary)``.
    """
    inside = np.zeros(y.shape, dtype=bool)
    on_edge = np.zeros(y.shape, dtype=bool)
    for (y1, x1), (y2, x2) in zip(ring[:-1], ring[1:]):
        cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
        within = ((np.minimum(x1, x2) <= x) & (x <= np.maximum(x1, x2))
                  & (np.minimum(y1, y2) <= y) & (y <= np.maximum(y1, y2)))
        on_edge |= (cross == 0) & within
        straddles = (y1 > y) != (y2 > y)
        if y1 != y2:
            x_at = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            inside ^= straddles & (x < x_at)
    return inside, on_edge


def filter_boundary(traces, boundary):
    """Keep the traces whose position lies inside ``boundary`` (edges included)."""
    if not isinstance(boundary, BoundaryPolygon):
        raise ConfigError("boundary must be a BoundaryPolygon")
    if not traces:
        return []
    lat = np.fromiter((t.lat for t in traces), float, len(traces))
    lon = np.fromiter((t.lon for t in traces), float, len(traces))
    mask = boundary.contains(lat, lon)
    return [t for t, keep in zip(traces, mask) if keep]


def filter_apps(traces, excluded):
    """Drop traces reported by any app in ``excluded``, preserving order."""
    excluded = frozenset(excluded)
    if not excluded:
        return list(traces)
    return [t for t in traces if t.app_id not in excluded]


def filter_accuracy(traces, max_accuracy=None):
    """Drop traces with accuracy radius above ``max_accuracy`` meters (None: keep all)."""
    if max_accuracy is None:
        return list(traces)
    return [t for t in traces if t.accuracy <= max_accuracy]


def summarize_apps(traces):
    """Per-app ping count, mean accuracy and population std of accuracy.

    Sorted by count descending, then by app id.
    """
    acc = {}
    for t in traces:
        acc.setdefault(t.app_id, []).append(t.accuracy)
    out = []
    for app, values in acc.items():
        v = np.asarray(values)
        out.append(AppSummary(app, len(v), float(v.mean()), float(v.std())))
    out.sort(key=lambda s: (-s.count, s.app_id))
    return out


def write_app_summary(path, summaries):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("rank", "app_id", "count", "avg_accuracy", "accuracy_std"))
        for rank, s in enumerate(summaries, 1):
            w.writerow((rank, s.app_id, s.count, f"{s.avg_accuracy:.6f}",
                        f"{s.accuracy_std:.6f}"))
