from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parkusage.ingest import TraceRecord
from parkusage.trips import (
    MODES,
    OTHER,
    RUNNING,
    START,
    STAY,
    WALKING,
    classify_mode,
    point_velocities,
    segment_trips,
    trip_duration,
)

# haversine oracle for 0.001 degrees of latitude, divided by 60 s
VELOCITY_MILLIDEGREE_PER_MIN = 1.8532513372255486


def ping(ts, user="u1", lat=40.78, lon=-73.96, acc=10.0):
    return TraceRecord(user, ts, lat, lon, acc, "a")


def test_single_point_trip():
    (t,) = segment_trips([ping(100)])
    assert len(t.points) == 1 and t.duration_s == 0 and t.trip_index == 0


def test_gaps_below_twenty_minutes_stay_together():
    (t,) = segment_trips([ping(0 + 10), ping(600 + 10), ping(1500 + 10)])
    assert t.duration_s == 1500


def test_gap_of_twenty_five_minutes_splits():
    a, b = segment_trips([ping(10), ping(610), ping(2110)])
    assert [p.timestamp for p in a.points] == [10, 610]
    assert [p.timestamp for p in b.points] == [2110]
    assert (a.trip_index, b.trip_index) == (0, 1)


def test_exactly_twenty_minutes_splits():
    assert len(segment_trips([ping(10), ping(1210)])) == 2
    assert len(segment_trips([ping(10), ping(1209)])) == 1


def test_unsorted_input_and_users_separate():
    trips = segment_trips([ping(500, "b"), ping(100, "a"), ping(50, "b"), ping(90, "a")])
    assert [(t.user_id, [p.timestamp for p in t.points]) for t in trips] == [
        ("a", [90, 100]), ("b", [50, 500])]
    assert trips[1].source_index == (2, 0)


def test_duplicate_timestamps_keep_most_accurate():
    recs = [ping(100, acc=30.0, lat=1.0), ping(100, acc=5.0, lat=2.0),
            ping(100, acc=5.0, lat=3.0), ping(200)]
    (t,) = segment_trips(recs)
    assert [p.timestamp for p in t.points] == [100, 200]
    assert t.points[0].lat == 2.0 and t.source_index[0] == 1


def test_trip_duration_max_minus_min():
    (t,) = segment_trips([ping(100), ping(400), ping(250)])
    assert trip_duration(t) == 300


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 20_000), min_size=1, max_size=40))
def test_duration_matches_naive_scan(ts):
    trips = segment_trips([ping(t) for t in ts])
    for trip in trips:
        stamps = [p.timestamp for p in trip.points]
        lo = hi = stamps[0]
        for s in stamps:
            lo, hi = min(lo, s), max(hi, s)
        assert trip_duration(trip) == hi - lo


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("abc"), st.integers(1, 30_000)), max_size=60),
       st.integers(60, 3000))
def test_segmentation_properties(pairs, gap):
    recs = [ping(t, u) for u, t in pairs]
    trips = segment_trips(recs, gap)
    by_user = {}
    for t in trips:
        stamps = [p.timestamp for p in t.points]
        assert all(b - a < gap for a, b in zip(stamps, stamps[1:]))
        assert all(b > a for a, b in zip(stamps, stamps[1:]))
        by_user.setdefault(t.user_id, []).append(t)
    for user, ts in by_user.items():
        for prev, nxt in zip(ts, ts[1:]):
            assert nxt.points[0].timestamp - prev.points[-1].timestamp >= gap
        flat = [p.timestamp for t in ts for p in t.points]
        assert flat == sorted({t for u, t in pairs if u == user})
    assert Counter(t.user_id for t in trips) == Counter(
        {u: len(v) for u, v in by_user.items()})


def test_velocity_zero_for_stationary_pings():
    (t,) = segment_trips([ping(100), ping(160)])
    (seg,) = point_velocities(t)
    assert seg.velocity_mps == 0.0 and seg.mode == STAY


def test_velocity_known_distance():
    (t,) = segment_trips([ping(100, lat=0.0, lon=0.0), ping(160, lat=0.001, lon=0.0)])
    (seg,) = point_velocities(t)
    assert seg.velocity_mps == pytest.approx(VELOCITY_MILLIDEGREE_PER_MIN, abs=1e-3)
    assert seg.mode == WALKING


def test_single_point_is_start():
    (t,) = segment_trips([ping(100)])
    (seg,) = point_velocities(t)
    assert seg.mode == START and seg.velocity_mps is None


@pytest.mark.parametrize("v,mode", [
    (0.0, STAY), (0.04, STAY), (0.05, WALKING), (1.4, WALKING), (3.09, WALKING),
    (3.1, RUNNING), (9.99, RUNNING), (10.0, OTHER), (12.0, OTHER),
])
def test_classify_mode_table(v, mode):
    assert classify_mode(v) == mode


def test_classify_mode_rejects_negative():
    with pytest.raises(ValueError):
        classify_mode(-0.1)
    with pytest.raises(ValueError):
        classify_mode(float("nan"))


@given(st.floats(0, 1e6, allow_nan=False))
def test_mode_partition_total(v):
    bands = [(0.0, 0.05, STAY), (0.05, 3.1, WALKING), (3.1, 10.0, RUNNING),
             (10.0, float("inf"), OTHER)]
    hits = [m for lo, hi, m in bands if lo <= v < hi]
    assert len(hits) == 1 and classify_mode(v) == hits[0]
    assert classify_mode(v) in MODES
