import filecmp
import math
import os

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from parkusage.exceptions import SpecError
from parkusage.geo import project
from parkusage.hdbscan import ClusterParams, cluster
from parkusage.ingest import filter_boundary, parse_traces
from parkusage.synth import (
    Blob,
    SynthSpec,
    generate,
    make_blobs,
    oracle_mst,
    oracle_prim,
    oracle_shared,
)
from parkusage.trips import segment_trips

SMALL = dict(n_users=30, trips_per_user=3, pings_per_trip=10, pings_spread=2,
             noise_points=40)


def test_seed_determinism(tmp_path):
    spec = SynthSpec(seed=42, **SMALL)
    generate(spec, tmp_path / "a")
    generate(spec, tmp_path / "b")
    names = sorted(os.listdir(tmp_path / "a"))
    assert "traces.csv" in names and "truth_points.csv" in names
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", names,
                                               shallow=False)
    assert match == names and not mismatch and not errors


def test_different_seed_differs():
    a, _, _ = generate(SynthSpec(seed=1, **SMALL))
    b, _, _ = generate(SynthSpec(seed=2, **SMALL))
    assert a != b


def test_one_blob_all_points_blob_zero():
    rows, truth, _ = generate(SynthSpec(n_users=30, trips_per_user=1, pings_per_trip=10))
    assert len(rows) == 300
    assert (truth.point_blob == 0).all()


def test_truth_consistent_with_traces(tmp_path):
    rows, truth, _ = generate(SynthSpec(seed=5, **SMALL), tmp_path)
    parsed = parse_traces(tmp_path / "traces.csv")
    assert parsed.rejected == 0 and len(parsed.records) == truth.n_points == len(rows)
    keys = {(t[0], t[1]) for t in truth.trips}
    got = {(tr.user_id, tr.trip_index) for tr in segment_trips(parsed.records)}
    assert got == keys
    lines = (tmp_path / "truth_points.csv").read_text().splitlines()
    assert lines[0] == "point_index,blob_id" and len(lines) == truth.n_points + 1
    lines = (tmp_path / "truth_trips.csv").read_text().splitlines()
    assert lines[0] == "user_id,trip_index,planted_start,planted_end"


def test_noise_inside_boundary():
    rows, truth, boundary = generate(SynthSpec(seed=3, n_users=5, noise_points=500))
    recs = parse_traces(_as_csv(rows)).records
    assert len(filter_boundary(recs, boundary)) == len(recs)
    n_noise = int((truth.point_blob < 0).sum())
    # the octagon keeps most of its bounding box
    assert 400 < n_noise < 500


def _as_csv(rows):
    import io
    buf = io.StringIO()
    buf.write("user_id,timestamp,lat,lon,accuracy,app_id\n")
    for r in rows:
        buf.write(",".join(str(x) for x in r) + "\n")
    buf.seek(0)
    return buf


def test_planted_trip_count_recovered():
    spec = SynthSpec(seed=9, n_users=50, trips_per_user=4, pings_per_trip=6, pings_spread=3,
                     ping_interval_s=600, trip_gap_s=3600, mode_mix=(0.3, 0.7, 0.0))
    rows, truth, _ = generate(spec)
    trips = segment_trips(parse_traces(_as_csv(rows)).records, 1200)
    assert len(trips) == len(truth.trips) == 200


def test_planted_median_recovered():
    spec = SynthSpec(seed=4, n_users=80, trips_per_user=3, pings_per_trip=12, pings_spread=5,
                     ping_interval_s=120, trip_gap_s=3600)
    rows, truth, _ = generate(spec)
    trips = segment_trips(parse_traces(_as_csv(rows)).records, 1200)
    assert float(np.median([t.duration_s for t in trips])) == truth.planted_median_s


def test_well_separated_blobs_recovered():
    spec = SynthSpec(seed=11, n_users=120, trips_per_user=3, pings_per_trip=10,
                     blobs=(Blob(40.7794, -73.9632, 15), Blob(40.7700, -73.9700, 15),
                            Blob(40.7850, -73.9560, 15)),
                     mode_mix=(0.0, 1.0, 0.0), noise_points=100)
    rows, truth, _ = generate(spec)
    recs = parse_traces(_as_csv(rows)).records
    labels = cluster(project(recs), ClusterParams(15, 100)).labels
    assert adjusted_rand_score(truth.point_blob, labels) >= 0.95


@pytest.mark.parametrize("kw", [
    dict(mode_mix=(0.5, 0.5, 0.1)),
    dict(blobs=(Blob(40.0, -73.0, 0.0),)),
    dict(n_users=0, noise_points=0),
    dict(n_users=3, blobs=()),
    dict(pings_per_trip=0),
    dict(ping_interval_s=60, trip_gap_s=60),
    dict(t_start=10, t_end=10),
])
def test_invalid_spec(kw):
    with pytest.raises(SpecError):
        SynthSpec(**kw)


def test_trips_not_fitting_window():
    with pytest.raises(SpecError):
        generate(SynthSpec(trips_per_user=5, t_start=0, t_end=3600))


def test_spec_text_round_trip():
    spec = SynthSpec(seed=3, blobs=(Blob(40.1, -73.2, 12.5, 2.0), Blob(40.2, -73.3, 30.0)),
                     apps=("x", "y"), mode_mix=(0.25, 0.5, 0.25))
    assert SynthSpec.from_text(spec.to_text()) == spec


def test_spec_text_errors():
    with pytest.raises(SpecError):
        SynthSpec.from_text("colour=blue\n")
    with pytest.raises(SpecError):
        SynthSpec.from_text("blob.0=40,-73\n")
    with pytest.raises(SpecError):
        SynthSpec.from_text("seed 4\n")


def test_make_blobs_shapes():
    X, truth = make_blobs([[0, 0], [100, 0]], 5, 50, n_noise=10, noise_extent=1000, seed=0)
    assert X.shape == (110, 2) and np.bincount(truth + 1).tolist() == [10, 50, 50]
    assert np.abs(X[truth < 0] - [50, 0]).max() <= 500


# -- oracles ----------------------------------------------------------------------

def test_oracle_shared_examples():
    assert oracle_shared([(0, 100), (50, 150)]) == [0.5, 0.5]
    assert oracle_shared([(3, 9)] * 5) == [1.0] * 5
    assert oracle_shared([(0, 1), (2, 3), (4, 5)]) == [0.0] * 3
    assert oracle_shared([(0, 1)]) == [0.0]


def test_oracle_shared_limit():
    with pytest.raises(ValueError):
        oracle_shared([(0, 1)] * 10_001)


def test_oracle_mst_examples():
    assert oracle_mst([[0, 0], [3, 4]], [0, 0]) == 5.0
    # collinear 0, 1, 3: edge weights 1, 2, 3
    assert oracle_mst([[0, 0], [1, 0], [3, 0]], [0, 0, 0]) == 3.0
    assert oracle_prim([[0, 0], [1, 0], [3, 0]], [0, 0, 0]) == 3.0


def test_oracle_mst_counts_all_trees():
    # with unit weights every one of the n^(n-2) trees costs n-1; with one
    # cheap pair the optimum must use it
    pts = [[math.cos(t), math.sin(t)] for t in np.linspace(0, 2 * np.pi, 6)[:5]]
    cores = [10.0] * 5
    assert oracle_mst(pts, cores) == pytest.approx(40.0)


@pytest.mark.parametrize("seed", range(5))
def test_oracle_mst_matches_prim(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 10, (7, 2))
    cores = rng.uniform(0, 3, 7)
    assert oracle_mst(X, cores) == pytest.approx(oracle_prim(X, cores), abs=1e-9)


def test_oracle_mst_refuses_large():
    with pytest.raises(ValueError):
        oracle_mst(np.zeros((9, 2)), np.zeros(9))
