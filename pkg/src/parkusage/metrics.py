"""Dwell times inside clusters and how much of them trips share with each other."""

import csv
import math
from typing import NamedTuple

import numpy as np

from .exceptions import FitError


class DwellRecord(NamedTuple):
    """First-to-last ping interval of one trip inside one cluster."""

    cluster_id: int
    user_id: str
    trip_index: int
    t_start: int
    t_end: int

    @property
    def dwell_s(self):
        return self.t_end - self.t_start

    @property
    def trip_key(self):
        return (self.user_id, self.trip_index)


class SharedExperienceRecord(NamedTuple):
    """Mean share of this trip's dwell interval overlapped by each other trip.

    ``overlap_s`` is the summed pairwise overlap in seconds and ``n_others`` the
    number of other trips it was averaged over.
    """

    cluster_id: int
    user_id: str
    trip_index: int
    shared_fraction: float
    overlap_s: float
    n_others: int


class ClusterSummary(NamedTuple):
    cluster_id: int
    n_points: int
    n_trips: int
    avg_dwell_s: float
    avg_shared: float
    excluded: bool


class LogLogFit(NamedTuple):
    slope: float
    intercept: float
    r2: float
    n_used: int
    n_dropped: int

    def __str__(self):
        return (f"slope={self.slope:.12g} intercept={self.intercept:.12g} "
                f"r2={self.r2:.12g} n_used={self.n_used} n_dropped={self.n_dropped}")


def dwell_records(labels, trips):
    """One record per (cluster, trip) pair with at least one ping in the cluster.

    ``labels`` is indexed like the collection the trips were segmented from
    (see :attr:`Trip.source_index`); noise (-1) is ignored.  The interval runs
    from the first to the last ping labelled with the cluster, so excursions
    to other clusters in between are inside it.
    """
    labels = np.asarray(labels)
    out = []
    for trip in trips:
        span = {}
        for idx, p in zip(trip.source_index, trip.points):
            k = int(labels[idx])
            if k < 0:
                continue
            lo_hi = span.get(k)
            if lo_hi is None:
                span[k] = [p.timestamp, p.timestamp]
            else:
                lo_hi[0] = min(lo_hi[0], p.timestamp)
                lo_hi[1] = max(lo_hi[1], p.timestamp)
        for k, (lo, hi) in span.items():
            out.append(DwellRecord(k, trip.user_id, trip.trip_index, lo, hi))
    out.sort(key=lambda d: (d.cluster_id, d.user_id, d.trip_index))
    return out


def overlap_s(a_start, a_end, b_start, b_end):
    """Length of the intersection of two closed intervals, never negative."""
    return max(0, min(a_end, b_end) - max(a_start, b_start))


def shared_fraction(target, others):
    """Shared-experience fraction of ``target`` against the other trips of its cluster.

    Each other trip contributes the share of the target's dwell interval it
    overlaps; a zero-length target counts 1 for every other interval that
    contains its instant.  The result is the mean contribution, 0 when there
    are no other trips.
    """
    others = [o for o in others if o.trip_key != target.trip_key]
    if any(o.cluster_id != target.cluster_id for o in others):
        raise ValueError("all dwell records must belong to the target's cluster")
    if not others:
        return SharedExperienceRecord(target.cluster_id, target.user_id,
                                      target.trip_index, 0.0, 0.0, 0)
    total = 0
    terms = 0.0
    for o in others:
        ov = overlap_s(target.t_start, target.t_end, o.t_start, o.t_end)
        total += ov
        if target.dwell_s > 0:
            terms += min(1.0, ov / target.dwell_s)
        else:
            terms += 1.0 if o.t_start <= target.t_start <= o.t_end else 0.0
    frac = min(1.0, max(0.0, terms / len(others)))
    return SharedExperienceRecord(target.cluster_id, target.user_id, target.trip_index,
                                  frac, float(total), len(others))


def _sweep(starts, ends):
    """Per-interval (summed overlap with all others, others containing the start).

    Uses the identity sum_j |[s,e] & [s_j,e_j]| = F(e) - F(s) with
    F(x) = sum_j clip(x - s_j, 0, e_j - s_j), evaluated from sorted endpoints
    and prefix sums.  Integer input stays integer, so sums are exact.
    """
    m = len(starts)
    s_sorted = np.sort(starts)
    e_sorted = np.sort(ends)
    s_cum = np.concatenate([[0], np.cumsum(s_sorted)])
    e_cum = np.concatenate([[0], np.cumsum(e_sorted)])

    def F(x):
        ns = np.searchsorted(s_sorted, x, side="right")
        ne = np.searchsorted(e_sorted, x, side="right")
        return (ns * x - s_cum[ns]) - (ne * x - e_cum[ne])

    total = F(ends) - F(starts) - (ends - starts)
    if total.dtype.kind == "f":
        # cancellation can leave rounding-level negatives
        total = np.maximum(total, 0)
    # closed-interval containment of each start instant, self excluded
    covering = (np.searchsorted(s_sorted, starts, side="right")
                - np.searchsorted(e_sorted, starts, side="left") - 1)
    assert (total >= 0).all() and (covering >= 0).all() and m == len(ends)
    return total, covering


def _shared_for_cluster(recs):
    m = len(recs)
    if m == 1:
        r = recs[0]
        return [SharedExperienceRecord(r.cluster_id, r.user_id, r.trip_index, 0.0, 0.0, 0)]
    starts = np.array([r.t_start for r in recs])
    ends = np.array([r.t_end for r in recs])
    if starts.dtype.kind == "f" or ends.dtype.kind == "f":
        # shifted and in extended precision: the prefix-sum differences cancel
        starts = starts.astype(np.longdouble)
        ends = ends.astype(np.longdouble)
        shift = starts.min()
        starts, ends = starts - shift, ends - shift
    total, covering = _sweep(starts, ends)
    out = []
    for r, tot, cov in zip(recs, total, covering):
        dwell = r.t_end - r.t_start
        frac = (tot / dwell) / (m - 1) if dwell > 0 else cov / (m - 1)
        frac = min(1.0, max(0.0, float(frac)))
        out.append(SharedExperienceRecord(r.cluster_id, r.user_id, r.trip_index,
                                          frac, float(tot), m - 1))
    return out


def shared_fractions(dwells):
    """Shared-experience records for every dwell record, grouped by cluster.

    Runs in ``O(m log m)`` per cluster of ``m`` trips.
    """
    by_cluster = {}
    for d in dwells:
        if d.t_end < d.t_start:
            raise ValueError(f"dwell of {d.trip_key} ends before it starts")
        by_cluster.setdefault(d.cluster_id, []).append(d)
    out = []
    for k in sorted(by_cluster):
        out.extend(_shared_for_cluster(by_cluster[k]))
    return out


def exclusion_threshold(n_points, percentile=99.0):
    """Default large-cluster cut: the given percentile of cluster point counts."""
    if len(n_points) == 0:
        return math.inf
    return float(np.percentile(np.asarray(n_points, dtype=float), percentile))


def cluster_summaries(dwells, shared, labels, exclude_above=None):
    """Per-cluster point mass, trip count, mean dwell and mean shared fraction.

    Clusters with more than ``exclude_above`` points are flagged ``excluded``;
    with ``exclude_above=None`` the 99th percentile of cluster sizes is used.
    Clusters that no trip reaches are not summarised.
    """
    labels = np.asarray(labels)
    ids, counts = np.unique(labels[labels >= 0], return_counts=True)
    mass = dict(zip(ids.tolist(), counts.tolist()))
    if exclude_above is None:
        exclude_above = exclusion_threshold(list(mass.values()))

    dwell_by = {}
    for d in dwells:
        dwell_by.setdefault(d.cluster_id, []).append(d.dwell_s)
    shared_by = {}
    for s in shared:
        shared_by.setdefault(s.cluster_id, []).append(s.shared_fraction)

    out = []
    for k in sorted(dwell_by):
        n_pts = mass.get(k, 0)
        fr = shared_by.get(k, [])
        out.append(ClusterSummary(
            cluster_id=k,
            n_points=n_pts,
            n_trips=len(dwell_by[k]),
            avg_dwell_s=float(np.mean(dwell_by[k])),
            avg_shared=float(np.mean(fr)) if fr else 0.0,
            excluded=bool(n_pts > exclude_above),
        ))
    return out


def loglog_fit(summaries):
    """Least-squares line through ``(log10 n_trips, log10 avg_shared)``.

    Excluded clusters are skipped silently; clusters with a zero trip count or
    zero shared fraction are skipped and counted in ``n_dropped``.

    Raises
    ------
    FitError
        Fewer than two usable clusters, or all usable clusters share one trip count.
    """
    usable = [s for s in summaries if not s.excluded]
    pts = [(s.n_trips, s.avg_shared) for s in usable if s.n_trips > 0 and s.avg_shared > 0]
    dropped = len(usable) - len(pts)
    if len(pts) < 2:
        raise FitError(f"need at least 2 clusters with positive values, have {len(pts)}")
    x = np.log10([p[0] for p in pts])
    y = np.log10([p[1] for p in pts])
    xm, ym = x.mean(), y.mean()
    sxx = ((x - xm) ** 2).sum()
    if sxx == 0:
        raise FitError("all clusters have the same trip count; slope is undefined")
    slope = ((x - xm) * (y - ym)).sum() / sxx
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    syy = ((y - ym) ** 2).sum()
    r2 = 1.0 - (resid ** 2).sum() / syy if syy > 0 else 1.0
    return LogLogFit(float(slope), float(intercept), float(r2), len(pts), dropped)


def top_shared(summaries, n=10):
    """Non-excluded clusters by mean shared fraction, highest first."""
    if n < 1:
        raise ValueError("n must be at least 1")
    kept = [s for s in summaries if not s.excluded]
    kept.sort(key=lambda s: (-s.avg_shared, s.cluster_id))
    return kept[:n]


# -- writers ------------------------------------------------------------------

def write_dwells(path, dwells):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("cluster_id", "user_id", "trip_index", "t_start", "t_end", "dwell_s"))
        for d in dwells:
            w.writerow((d.cluster_id, d.user_id, d.trip_index, d.t_start, d.t_end, d.dwell_s))


def write_shared(path, shared):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("cluster_id", "user_id", "trip_index", "shared_fraction"))
        for s in shared:
            w.writerow((s.cluster_id, s.user_id, s.trip_index, f"{s.shared_fraction:.12g}"))


def write_summaries(path, summaries):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("cluster_id", "n_points", "n_trips", "avg_dwell_s", "avg_shared", "excluded"))
        for s in summaries:
            w.writerow((s.cluster_id, s.n_points, s.n_trips, f"{s.avg_dwell_s:.6f}",
                        f"{s.avg_shared:.12g}", str(s.excluded).lower()))


def write_top_shared(path, ranked):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("rank", "cluster_id", "avg_shared", "n_trips", "avg_dwell_s"))
        for r, s in enumerate(ranked, 1):
            w.writerow((r, s.cluster_id, f"{s.avg_shared:.12g}", s.n_trips,
                        f"{s.avg_dwell_s:.6f}"))
