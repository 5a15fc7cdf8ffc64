"""Splitting each user's pings into trips and labelling how they moved."""

import csv
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .geo import haversine_m

#: A gap of this many seconds or more between consecutive pings starts a new trip.
DEFAULT_GAP_S = 1200

STAY, WALKING, RUNNING, OTHER, START = "stay", "walking", "running", "other", "start"
MODES = (STAY, WALKING, RUNNING, OTHER, START)

# right-open velocity bands in m/s; anything at or above the last bound is OTHER
_MODE_BOUNDS = ((0.05, STAY), (3.1, WALKING), (10.0, RUNNING))


@dataclass(frozen=True)
class Trip:
    """A user's pings with no internal gap of ``gap_s`` or more.

    ``source_index[i]`` is the position of ``points[i]`` in the collection that
    was segmented.
    """

    user_id: str
    trip_index: int
    points: tuple
    source_index: tuple

    @property
    def duration_s(self):
        return trip_duration(self)

    @property
    def start_ts(self):
        return self.points[0].timestamp

    @property
    def end_ts(self):
        return self.points[-1].timestamp

    @property
    def key(self):
        return (self.user_id, self.trip_index)


class ModeSegment(NamedTuple):
    """Velocity and mode for the pair of pings ``seg_index``, ``seg_index + 1``.

    Single-ping trips get one ``start`` segment with ``velocity_mps=None``.
    """

    user_id: str
    trip_index: int
    seg_index: int
    start_ts: int
    velocity_mps: Optional[float]
    mode: str


def _dedupe(indexed):
    # indexed: (source index, record) for one user, sorted by (timestamp, index)
    out = []
    for item in indexed:
        if out and out[-1][1].timestamp == item[1].timestamp:
            if item[1].accuracy < out[-1][1].accuracy:
                out[-1] = item
            continue
        out.append(item)
    return out


def segment_trips(traces, gap_s=DEFAULT_GAP_S):
    """Group pings into trips per user.

    Each user's pings are sorted by time, duplicate timestamps are collapsed to
    the most accurate fix (first seen on ties) and the sequence is cut wherever
    consecutive pings are ``gap_s`` seconds or more apart.  Trips come back
    ordered by user id, then chronologically with ``trip_index`` from 0.
    """
    if gap_s <= 0:
        raise ValueError("gap_s must be positive")
    by_user = {}
    for i, t in enumerate(traces):
        by_user.setdefault(t.user_id, []).append((i, t))

    trips = []
    for user in sorted(by_user):
        seq = sorted(by_user[user], key=lambda it: (it[1].timestamp, it[0]))
        seq = _dedupe(seq)
        start = 0
        j = 0
        for k in range(1, len(seq) + 1):
            if k == len(seq) or seq[k][1].timestamp - seq[k - 1][1].timestamp >= gap_s:
                chunk = seq[start:k]
                trips.append(Trip(user, j, tuple(r for _, r in chunk),
                                  tuple(i for i, _ in chunk)))
                j += 1
                start = k
    return trips


def trip_duration(trip):
    """Elapsed seconds between the latest and earliest ping of ``trip``."""
    ts = [p.timestamp for p in trip.points]
    return max(ts) - min(ts)


def classify_mode(v):
    """Map a speed in m/s to a travel mode.

    >>> [classify_mode(v) for v in (0.0, 1.4, 3.1, 12.0)]
    ['stay', 'walking', 'running', 'other']
    """
    if not v >= 0:
        raise ValueError(f"velocity must be non-negative, got {v!r}")
    for bound, mode in _MODE_BOUNDS:
        if v < bound:
            return mode
    return OTHER


def point_velocities(trip):
    """Per-pair speeds along ``trip`` with their travel modes."""
    pts = trip.points
    if len(pts) == 1:
        return [ModeSegment(trip.user_id, trip.trip_index, 0, pts[0].timestamp, None, START)]
    segs = []
    for i, (p, q) in enumerate(zip(pts[:-1], pts[1:])):
        dt = q.timestamp - p.timestamp
        if dt <= 0:
            raise RuntimeError(
                f"trip {trip.key} has non-increasing timestamps at segment {i}")
        v = haversine_m((p.lat, p.lon), (q.lat, q.lon)) / dt
        segs.append(ModeSegment(trip.user_id, trip.trip_index, i, p.timestamp, v,
                                classify_mode(v)))
    return segs


def mode_segments(trips):
    return [s for trip in trips for s in point_velocities(trip)]


def write_trips(path, trips):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("user_id", "trip_index", "start_ts", "end_ts", "duration_s", "n_points"))
        for t in trips:
            w.writerow((t.user_id, t.trip_index, t.start_ts, t.end_ts, t.duration_s,
                        len(t.points)))


def write_trip_points(path, trips):
    """Point-to-trip map: ``point_index,user_id,trip_index``, sorted by point index."""
    rows = sorted((i, t.user_id, t.trip_index) for t in trips for i in t.source_index)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("point_index", "user_id", "trip_index"))
        w.writerows(rows)


def write_segments(path, segments):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("user_id", "trip_index", "seg_index", "velocity_mps", "mode"))
        for s in segments:
            v = "" if s.velocity_mps is None else f"{s.velocity_mps:.6f}"
            w.writerow((s.user_id, s.trip_index, s.seg_index, v, s.mode))
