"""Synthetic trace datasets with planted clusters and trips, plus brute-force oracles.

Randomness comes from NumPy's ``PCG64`` bit generator seeded with the SynthSpec
``seed`` (``numpy.random.default_rng(seed)``); draws happen in a fixed order so
equal SynthSpecs give byte-identical files.
"""

import csv
import itertools
import json
import math
import os
from dataclasses import dataclass, field, fields

import numpy as np

from .exceptions import SpecError
from .geo import LocalProjector
from .ingest import TRACE_COLUMNS, BoundaryPolygon

MODE_NAMES = ("stay", "walking", "running")


@dataclass(frozen=True)
class Blob:
    lat: float
    lon: float
    sigma_m: float
    weight: float = 1.0


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a synthetic dataset.

    Every user makes ``trips_per_user`` trips one after another, separated by
    ``trip_gap_s`` plus up to ``gap_jitter_s`` seconds.  A trip visits one blob
    (chosen by weight) and pings ``pings_per_trip`` +/- ``pings_spread`` times.
    Stay trips repeat a single position; walking trips ping every
    ``ping_interval_s`` seconds at independent positions in the blob; running
    trips do the same at a tenth of the interval.  ``noise_points`` single
    pings by separate users are scattered over the boundary's bounding box
    and those outside the boundary are discarded.
    """

    seed: int = 42
    n_users: int = 100
    trips_per_user: int = 3
    pings_per_trip: int = 10
    pings_spread: int = 0
    ping_interval_s: int = 60
    trip_gap_s: int = 3600
    gap_jitter_s: int = 0
    blobs: tuple = (Blob(40.7812, -73.9665, 15.0),)
    mode_mix: tuple = (0.2, 0.7, 0.1)
    noise_points: int = 0
    t_start: int = 1493596800
    t_end: int = 1496275200
    apps: tuple = ("appA", "appB", "appC")
    boundary_margin_m: float = 300.0

    def __post_init__(self):
        if self.n_users < 0 or self.trips_per_user < 0 or self.noise_points < 0:
            raise SpecError("counts must be non-negative")
        if not self.blobs and self.n_users * self.trips_per_user > 0:
            raise SpecError("trips need at least one blob")
        if self.n_users == 0 and self.noise_points == 0:
            raise SpecError("spec produces no points")
        if self.pings_per_trip < 1 or self.pings_spread < 0 \
                or self.pings_per_trip - self.pings_spread < 1:
            raise SpecError("every trip needs at least one ping")
        if self.ping_interval_s < 1 or self.trip_gap_s <= self.ping_interval_s:
            raise SpecError("trip_gap_s must exceed ping_interval_s >= 1")
        if len(self.mode_mix) != 3 or min(self.mode_mix) < 0 \
                or abs(sum(self.mode_mix) - 1.0) > 1e-9:
            raise SpecError("mode_mix needs three non-negative proportions summing to 1")
        for b in self.blobs:
            if not b.sigma_m > 0 or not b.weight > 0:
                raise SpecError("blob sigma and weight must be positive")
        if self.t_end <= self.t_start or not self.apps:
            raise SpecError("empty time window or app list")

    # -- key=value text form --------------------------------------------------

    @classmethod
    def from_text(cls, text):
        kw = {}
        blobs = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SpecError(f"line {lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key.startswith("blob."):
                parts = [float(v) for v in value.split(",")]
                if len(parts) not in (3, 4):
                    raise SpecError(f"line {lineno}: blob needs lat,lon,sigma_m[,weight]")
                blobs[int(key[5:])] = Blob(*parts)
            elif key == "mode_mix":
                kw[key] = tuple(float(v) for v in value.split(","))
            elif key == "apps":
                kw[key] = tuple(v.strip() for v in value.split(",") if v.strip())
            elif key == "boundary_margin_m":
                kw[key] = float(value)
            elif key in _INT_KEYS:
                kw[key] = int(value)
            else:
                raise SpecError(f"line {lineno}: unknown key {key!r}")
        if blobs:
            kw["blobs"] = tuple(blobs[k] for k in sorted(blobs))
        return cls(**kw)

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "blobs":
                lines += [f"blob.{i}={b.lat!r},{b.lon!r},{b.sigma_m!r},{b.weight!r}"
                          for i, b in enumerate(v)]
            elif isinstance(v, tuple):
                lines.append(f"{f.name}={','.join(str(x) for x in v)}")
            else:
                lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"


_INT_KEYS = {f.name for f in fields(SynthSpec)
             if f.name not in ("blobs", "mode_mix", "apps", "boundary_margin_m")}


@dataclass
class GroundTruth:
    point_blob: np.ndarray
    trips: list = field(default_factory=list)  # (user_id, trip_index, start, end, blob)
    planted_median_s: float = 0.0
    blob_shared: dict = field(default_factory=dict)

    @property
    def n_points(self):
        return len(self.point_blob)


def _boundary_for(spec, projector, centers_xy):
    if len(centers_xy):
        sig = max(b.sigma_m for b in spec.blobs)
        lo = centers_xy.min(axis=0) - 5 * sig - spec.boundary_margin_m
        hi = centers_xy.max(axis=0) + 5 * sig + spec.boundary_margin_m
    else:
        lo = np.array([-spec.boundary_margin_m] * 2)
        hi = -lo
    cx = cy = 0.5 * spec.boundary_margin_m
    # octagon: the box with its corners cut off
    ring_xy = np.array([
        [lo[0] + cx, lo[1]], [hi[0] - cx, lo[1]], [hi[0], lo[1] + cy], [hi[0], hi[1] - cy],
        [hi[0] - cx, hi[1]], [lo[0] + cx, hi[1]], [lo[0], hi[1] - cy], [lo[0], lo[1] + cy],
        [lo[0] + cx, lo[1]],
    ])
    ring = projector.inverse_transform(ring_xy)
    poly = BoundaryPolygon([tuple(p) for p in ring])
    return poly, lo, hi


def generate(spec, out_dir=None):
    """Draw a dataset from ``spec``.

    Returns ``(rows, truth, boundary)`` where ``rows`` are trace-CSV tuples in
    file order.  With ``out_dir`` the files ``traces.csv``, ``boundary.geojson``,
    ``truth_points.csv``, ``truth_trips.csv``, ``truth_blobs.csv`` and
    ``truth.txt`` are written there as well.
    """
    rng = np.random.default_rng(spec.seed)
    centers_ll = np.array([(b.lat, b.lon) for b in spec.blobs]) if spec.blobs else np.empty((0, 2))
    origin = tuple(centers_ll.mean(axis=0)) if len(centers_ll) else (40.7812, -73.9665)
    projector = LocalProjector(origin=origin).fit(np.array([origin]))
    centers_xy = projector.transform(centers_ll) if len(centers_ll) else np.empty((0, 2))
    boundary, lo, hi = _boundary_for(spec, projector, centers_xy)

    weights = np.array([b.weight for b in spec.blobs]) if spec.blobs else np.ones(0)
    weights = weights / weights.sum() if len(weights) else weights
    n_trips = spec.n_users * spec.trips_per_user

    trip_blob = rng.choice(len(weights), size=n_trips, p=weights) if n_trips else np.empty(0, int)
    trip_mode = rng.choice(3, size=n_trips, p=spec.mode_mix) if n_trips else np.empty(0, int)
    trip_pings = (spec.pings_per_trip
                  + rng.integers(-spec.pings_spread, spec.pings_spread + 1, size=n_trips))
    interval = np.where(trip_mode == 2, max(1, spec.ping_interval_s // 10), spec.ping_interval_s)
    durations = (trip_pings - 1) * interval
    gaps = spec.trip_gap_s + (rng.integers(0, spec.gap_jitter_s + 1, size=n_trips)
                              if spec.gap_jitter_s else np.zeros(n_trips, dtype=np.int64))

    # lay each user's trips end to end inside the time window
    rows = []
    xy_parts = []
    truth_trips = []
    blob_of_row = []
    for u in range(spec.n_users):
        sl = slice(u * spec.trips_per_user, (u + 1) * spec.trips_per_user)
        span = int(durations[sl].sum() + gaps[sl][1:].sum())
        room = spec.t_end - spec.t_start - span
        if room <= 0:
            raise SpecError(f"user {u}: {span} s of trips do not fit the time window")
        t = spec.t_start + int(rng.integers(0, room))
        user = f"u{u:05d}"
        for j in range(spec.trips_per_user):
            k = u * spec.trips_per_user + j
            if j:
                t += int(gaps[k])
            b = int(trip_blob[k])
            npng = int(trip_pings[k])
            sigma = spec.blobs[b].sigma_m
            if trip_mode[k] == 0:
                off = np.repeat(rng.normal(0.0, sigma, size=(1, 2)), npng, axis=0)
            else:
                off = rng.normal(0.0, sigma, size=(npng, 2))
            acc = rng.gamma(2.0, 10.0, size=npng)
            app = spec.apps[int(rng.integers(len(spec.apps)))]
            times = t + interval[k] * np.arange(npng)
            xy_parts.append(centers_xy[b] + off)
            for i in range(npng):
                rows.append([user, int(times[i]), None, None, f"{acc[i]:.1f}", app])
                blob_of_row.append(b)
            truth_trips.append((user, j, int(times[0]), int(times[-1]), b))
            t = int(times[-1])

    if xy_parts:
        ll = projector.inverse_transform(np.vstack(xy_parts))
        for row, (la, lo_) in zip(rows, ll):
            row[2], row[3] = f"{la:.7f}", f"{lo_:.7f}"
    rows = [tuple(r) for r in rows]

    if spec.noise_points:
        xy = rng.uniform(lo, hi, size=(spec.noise_points, 2))
        ll = projector.inverse_transform(xy)
        ts = rng.integers(spec.t_start, spec.t_end, size=spec.noise_points)
        acc = rng.gamma(2.0, 10.0, size=spec.noise_points)
        lat_s = np.array([float(f"{v:.7f}") for v in ll[:, 0]])
        lon_s = np.array([float(f"{v:.7f}") for v in ll[:, 1]])
        inside = boundary.contains(lat_s, lon_s)
        for i in np.flatnonzero(inside):
            user = f"n{i:05d}"
            rows.append((user, int(ts[i]), f"{ll[i, 0]:.7f}", f"{ll[i, 1]:.7f}",
                         f"{acc[i]:.1f}", spec.apps[0]))
            blob_of_row.append(-1)
            truth_trips.append((user, 0, int(ts[i]), int(ts[i]), -1))

    order = sorted(range(len(rows)), key=lambda r: (rows[r][1], rows[r][0]))
    rows = [rows[r] for r in order]
    point_blob = np.asarray(blob_of_row, dtype=np.int64)[order] if rows else np.empty(0, int)
    truth_trips.sort(key=lambda t: (t[0], t[1]))

    dur = [t[3] - t[2] for t in truth_trips]
    blob_shared = {}
    for b in range(len(spec.blobs)):
        iv = [(t[2], t[3]) for t in truth_trips if t[4] == b]
        if iv:
            blob_shared[b] = float(np.mean(oracle_shared(iv)))
    truth = GroundTruth(point_blob, truth_trips,
                        float(np.median(dur)) if dur else 0.0, blob_shared)
    if out_dir is not None:
        write_dataset(out_dir, spec, rows, truth, boundary)
    return rows, truth, boundary


def write_dataset(out_dir, spec, rows, truth, boundary):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "traces.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        w.writerows(rows)
    with open(os.path.join(out_dir, "boundary.geojson"), "w", encoding="utf-8") as fh:
        json.dump({"type": "Feature", "properties": {}, "geometry": boundary.to_geojson()},
                  fh, indent=1)
        fh.write("\n")
    with open(os.path.join(out_dir, "truth_points.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("point_index", "blob_id"))
        w.writerows(enumerate(truth.point_blob.tolist()))
    with open(os.path.join(out_dir, "truth_trips.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("user_id", "trip_index", "planted_start", "planted_end"))
        w.writerows(t[:4] for t in truth.trips)
    with open(os.path.join(out_dir, "truth_blobs.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("blob_id", "n_points", "n_trips", "planted_avg_shared"))
        for b in sorted(truth.blob_shared):
            w.writerow((b, int((truth.point_blob == b).sum()),
                        sum(1 for t in truth.trips if t[4] == b),
                        f"{truth.blob_shared[b]:.12g}"))
    with open(os.path.join(out_dir, "truth.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"n_points={truth.n_points}\n")
        fh.write(f"n_noise={int((truth.point_blob < 0).sum())}\n")
        fh.write(f"n_trips={len(truth.trips)}\n")
        fh.write(f"n_blobs={len(spec.blobs)}\n")
        fh.write(f"planted_median_s={truth.planted_median_s:g}\n")
    with open(os.path.join(out_dir, "spec.txt"), "w", encoding="utf-8") as fh:
        fh.write(spec.to_text())


def make_blobs(centers, sigma, n_per_blob, n_noise=0, noise_extent=None, seed=0):
    """Planted Gaussian blobs in projected meters.

    Noise is uniform over the square of side ``noise_extent`` centred on the
    mean of ``centers`` (default: 4x the largest centre spread).  Returns
    ``(points, truth)`` with ``truth`` -1 for noise.
    """
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=float)
    pts = [rng.normal(c, sigma, size=(n_per_blob, 2)) for c in centers]
    truth = [np.full(n_per_blob, k) for k in range(len(centers))]
    if n_noise:
        mid = centers.mean(axis=0)
        if noise_extent is None:
            noise_extent = 4 * max(np.ptp(centers, axis=0).max(), 10 * sigma)
        pts.append(rng.uniform(mid - noise_extent / 2, mid + noise_extent / 2, size=(n_noise, 2)))
        truth.append(np.full(n_noise, -1))
    return np.vstack(pts), np.concatenate(truth)


# -- oracles ------------------------------------------------------------------

def oracle_shared(intervals):
    """Per-interval shared fraction by direct pairwise evaluation (O(m^2)).

    Every pair is evaluated explicitly (in row blocks to bound memory).
    """
    iv = np.asarray(list(intervals), dtype=np.float64).reshape(-1, 2)
    m = len(iv)
    if m > 10_000:
        raise ValueError("oracle_shared is limited to 10,000 intervals")
    if m < 2:
        return [0.0] * m
    s, e = iv[:, 0], iv[:, 1]
    out = []
    for lo in range(0, m, 512):
        s1 = s[lo:lo + 512, None]
        e1 = e[lo:lo + 512, None]
        ov = np.maximum(0.0, np.minimum(e1, e[None, :]) - np.maximum(s1, s[None, :]))
        dwell = e1 - s1
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(dwell > 0, np.minimum(1.0, ov / dwell),
                            ((s[None, :] <= s1) & (s1 <= e[None, :])).astype(float))
        rows = np.arange(len(s1))
        frac[rows, lo + rows] = 0.0
        out.extend((frac.sum(axis=1) / (m - 1)).tolist())
    return out


def _mreach_matrix(points, cores):
    pts = [tuple(map(float, p)) for p in points]
    n = len(pts)
    W = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i != j:
                d = math.sqrt((pts[i][0] - pts[j][0]) ** 2 + (pts[i][1] - pts[j][1]) ** 2)
                W[i][j] = max(d, float(cores[i]), float(cores[j]))
    return W


def oracle_prim(points, cores):
    """Minimum total mutual-reachability weight by textbook dense Prim."""
    W = _mreach_matrix(points, cores)
    n = len(W)
    if n < 2:
        return 0.0
    in_tree = [False] * n
    key = [math.inf] * n
    key[0] = 0.0
    total = 0.0
    for _ in range(n):
        u = min((k, i) for i, k in enumerate(key) if not in_tree[i])[1]
        in_tree[u] = True
        total += key[u]
        for v in range(n):
            if not in_tree[v] and W[u][v] < key[v]:
                key[v] = W[u][v]
    return total


def oracle_mst(points, cores):
    """Minimum total mutual-reachability weight over every spanning tree (n <= 8).

    Enumerates all ``n ** (n - 2)`` labelled trees through their Pruefer codes.
    """
    n = len(points)
    if n > 8:
        raise ValueError("exhaustive enumeration is limited to 8 points")
    if n < 2:
        return 0.0
    W = np.array(_mreach_matrix(points, cores))
    if n == 2:
        return float(W[0, 1])
    codes = np.array(list(itertools.product(range(n), repeat=n - 2)), dtype=np.int64)
    S = len(codes)
    rows = np.arange(S)
    degree = np.ones((S, n), dtype=np.int64)
    for c in range(n - 2):
        np.add.at(degree, (rows, codes[:, c]), 1)
    total = np.zeros(S)
    for c in range(n - 2):
        leaf = np.argmax(degree == 1, axis=1)
        total += W[leaf, codes[:, c]]
        degree[rows, leaf] -= 1
        degree[rows, codes[:, c]] -= 1
    ends = np.argsort(degree != 1, axis=1, kind="stable")[:, :2]
    total += W[ends[:, 0], ends[:, 1]]
    return float(total.min())
