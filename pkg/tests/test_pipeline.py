import filecmp
import os

import pytest

from parkusage.cli import main
from parkusage.exceptions import PipelineError
from parkusage.pipeline import (
    PipelineConfig,
    convex_hull,
    read_assignments,
    read_manifest,
    run_pipeline,
)

SPEC = """\
seed=21
n_users=120
trips_per_user=3
pings_per_trip=10
pings_spread=2
ping_interval_s=60
trip_gap_s=3600
gap_jitter_s=600
blob.0=40.7794,-73.9632,15
blob.1=40.7700,-73.9700,15
blob.2=40.7850,-73.9560,15
mode_mix=0.2,0.7,0.1
noise_points=100
t_start=1493596800
t_end=1494201600
apps=appA,appB,appC
"""

OUTPUTS = ["apps.csv", "traces_filtered.csv", "trips.csv", "trip_points.csv", "segments.csv",
           "clusters.csv", "clusters.geojson", "dwell.csv", "shared.csv", "summary.csv",
           "top_shared.csv", "fit.txt", "hist_hourly.csv", "hist_weekly.csv",
           "hist_duration.csv", "manifest.txt"]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    (root / "spec.txt").write_text(SPEC)
    assert main(["synth", "--spec", str(root / "spec.txt"), "--out", str(root / "data")]) == 0
    return root / "data"


@pytest.fixture(scope="module")
def run_dir(dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = main(["run", "--input", str(dataset / "traces.csv"),
                 "--boundary", str(dataset / "boundary.geojson"), "--out", str(out)])
    assert code == 0
    return out


def test_run_finds_three_clusters(run_dir):
    m = read_manifest(run_dir / "manifest.txt")
    assert m["n_clusters"] == "3"
    assert sorted(p for p in os.listdir(run_dir)) == sorted(OUTPUTS)


def test_manifest_counts_monotone(run_dir):
    m = {k: v for k, v in read_manifest(run_dir / "manifest.txt").items()}
    n = [int(m[k]) for k in ("n_parsed", "n_in_boundary", "n_app_filtered",
                             "n_accuracy_filtered")]
    assert n == sorted(n, reverse=True)
    assert int(m["n_rejected_lines"]) == 0


def test_rerun_byte_identical(dataset, run_dir, tmp_path):
    code = main(["run", "--input", str(dataset / "traces.csv"),
                 "--boundary", str(dataset / "boundary.geojson"), "--out", str(tmp_path)])
    assert code == 0
    match, mismatch, errors = filecmp.cmpfiles(run_dir, tmp_path, OUTPUTS, shallow=False)
    assert not mismatch and not errors and len(match) == len(OUTPUTS)


def test_missing_boundary(dataset, tmp_path, capsys):
    code = main(["run", "--input", str(dataset / "traces.csv"),
                 "--boundary", str(tmp_path / "nope.geojson"), "--out", str(tmp_path / "o")])
    assert code != 0
    assert "boundary" in capsys.readouterr().err
    assert not (tmp_path / "o" / "manifest.txt").exists()


def test_stage_error_leaves_no_partial_outputs(dataset, tmp_path):
    bad = tmp_path / "bad.geojson"
    bad.write_text('{"type": "Point", "coordinates": [0, 0]}')
    cfg = PipelineConfig(inputs=[str(dataset / "traces.csv")], boundary=str(bad),
                         out=str(tmp_path / "o"))
    with pytest.raises(PipelineError) as info:
        run_pipeline(cfg)
    assert str(info.value).startswith("[ingest]")
    assert os.listdir(tmp_path / "o") == []


def test_config_validation(tmp_path):
    cfg = PipelineConfig(inputs=["x"], boundary="y", out=str(tmp_path), min_pts=0)
    with pytest.raises(PipelineError) as info:
        run_pipeline(cfg)
    assert str(info.value).startswith("[config]")


def test_convex_hull():
    pts = [(0, 0), (2, 0), (1, 1), (2, 2), (0, 2), (1, 0)]
    assert convex_hull(pts) == [(0, 0), (2, 0), (2, 2), (0, 2)]


# -- individual verbs ----------------------------------------------------------------

def test_verbs_chain(dataset, run_dir, tmp_path):
    traces, boundary = str(dataset / "traces.csv"), str(dataset / "boundary.geojson")
    assert main(["ingest", "--input", traces, "--boundary", boundary,
                 "--out", str(tmp_path / "i")]) == 0
    filtered = str(tmp_path / "i" / "traces_filtered.csv")
    assert main(["trips", "--input", filtered, "--out", str(tmp_path / "t")]) == 0
    assert main(["cluster", "--input", filtered, "--out", str(tmp_path / "c")]) == 0
    assert main(["metrics", "--input", filtered,
                 "--assignments", str(tmp_path / "c" / "clusters.csv"),
                 "--out", str(tmp_path / "m")]) == 0
    assert main(["report", "--input", filtered, "--out", str(tmp_path / "r")]) == 0
    pairs = [("i", "traces_filtered.csv"), ("i", "apps.csv"), ("t", "trips.csv"),
             ("t", "segments.csv"), ("c", "clusters.csv"), ("m", "summary.csv"),
             ("m", "shared.csv"), ("m", "fit.txt"), ("r", "hist_hourly.csv"),
             ("r", "hist_duration.csv")]
    for sub, name in pairs:
        assert filecmp.cmp(tmp_path / sub / name, run_dir / name, shallow=False), name
    assert len(set(read_assignments(tmp_path / "c" / "clusters.csv")) - {-1}) == 3


def test_config_file_and_override(dataset, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"input={dataset / 'traces.csv'}\nboundary={dataset / 'boundary.geojson'}\n"
                   "min-cluster-size=5000\nexclude_app=appB,appC\n")
    assert main(["--config", str(cfg), "run", "--out", str(tmp_path / "a")]) == 0
    m = read_manifest(tmp_path / "a" / "manifest.txt")
    assert (m["min_cluster_size"], m["n_clusters"], m["exclude_apps"]) == ("5000", "0",
                                                                           "appB,appC")
    assert main(["--config", str(cfg), "run", "--min-cluster-size", "100",
                 "--out", str(tmp_path / "b")]) == 0
    m = read_manifest(tmp_path / "b" / "manifest.txt")
    assert m["min_cluster_size"] == "100" and int(m["n_clusters"]) >= 1


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour=blue\n")
    with pytest.raises(SystemExit):
        main(["--config", str(cfg), "run", "--out", str(tmp_path)])


def test_metrics_length_mismatch(dataset, tmp_path, capsys):
    (tmp_path / "c.csv").write_text("point_index,user_id,timestamp,cluster_label\n0,u,0,0\n")
    code = main(["metrics", "--input", str(dataset / "traces.csv"),
                 "--assignments", str(tmp_path / "c.csv"), "--out", str(tmp_path / "m")])
    assert code == 1 and "rows" in capsys.readouterr().err


def test_metrics_bad_assignments(dataset, tmp_path, capsys):
    (tmp_path / "c.csv").write_text("point_index,cluster_id\n0,0\n")
    code = main(["metrics", "--input", str(dataset / "traces.csv"),
                 "--assignments", str(tmp_path / "c.csv"), "--out", str(tmp_path / "m")])
    assert code == 1 and "cluster_label" in capsys.readouterr().err
