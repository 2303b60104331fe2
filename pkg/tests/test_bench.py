import csv
import json

import numpy as np
import pytest

from factomp import bench, radar
from factomp.cli import main


def small_spec(tmp_path, **kw):
    base = dict(K=2, grid_sizes=[8, 16], algorithms=["omp", "fomp", "comp", "fcomp"],
                trials=3, base_seed=7, out_dir=str(tmp_path / "out"))
    base.update(kw)
    return bench.ExperimentSpec(**base)


def on_grid_target(spec, rng):
    d = spec.radar.dictionary(spec.grid_sizes[0])
    rc, v = d.grid.point((3, 5))
    return radar.Scene([radar.Target(radar.decouple(rc, v, spec.radar), v, 1.0)])


def test_forced_on_grid_target_no_miss(tmp_path):
    spec = small_spec(tmp_path, K=1, trials=1, algorithms=["fcomp"], grid_sizes=[16])
    (rec,) = bench.run_experiment(spec, scene_factory=on_grid_target)
    assert rec.misses == 0 and rec.k == 1 and rec.time_total_ns > 0


def test_paired_design_and_determinism(tmp_path):
    spec = small_spec(tmp_path)
    a = bench.run_experiment(spec)
    b = bench.run_experiment(spec)
    assert len(a) == 2 * 3 * 4
    by_key = {}
    for r in a:
        by_key.setdefault((r.n_star, r.trial), set()).add(r.checksum)
        assert 0 <= r.misses <= r.k and r.time_total_ns >= 0
    assert all(len(s) == 1 for s in by_key.values())
    strip = lambda recs: [(r.algo, r.n_star, r.trial, r.seed, r.misses, r.k, r.checksum) for r in recs]
    assert strip(a) == strip(b)
    # scene stream ignores grid density
    assert by_key[(8, 1)] == by_key[(16, 1)]


def test_raw_csv_identical_apart_from_timing(tmp_path):
    spec = small_spec(tmp_path)
    paths = [bench.write_raw_csv(bench.run_experiment(spec), tmp_path / f"raw{i}.csv") for i in range(2)]
    rows = []
    for p in paths:
        with open(p) as f:
            rows.append([[v for h, v in zip(bench.RAW_HEADER, line) if not h.startswith("time")]
                         for line in csv.reader(f)])
    assert rows[0] == rows[1]


def test_parallel_matches_serial(tmp_path):
    serial = bench.run_experiment(small_spec(tmp_path))
    par = bench.run_experiment(small_spec(tmp_path, parallel=True))
    assert [(r.algo, r.misses, r.checksum) for r in serial] == [(r.algo, r.misses, r.checksum) for r in par]
    assert all(r.time_total_ns == 0 for r in par)


def _rec(algo, n, trial, misses, k=5, t=100):
    return bench.TrialRecord(algo, n, trial, trial, t, t, 0, 0, misses, k)


def test_summarize_arithmetic():
    assert bench.summarize([]) == []
    recs = [_rec("fcomp", 16, i, 0) for i in range(4)]
    (row,) = bench.summarize(recs)
    assert row["miss_rate"] == 0 and row["trials"] == 4 and row["miss_ci95"] == 0
    recs = [_rec("fomp", 32, i, 1 if i < 10 else 0) for i in range(200)]
    (row,) = bench.summarize(recs)
    assert row["miss_rate"] == pytest.approx(0.01)
    assert row["miss_ci95"] == pytest.approx(1.96 * np.sqrt(0.01 * 0.99 / 1000))


def test_summarize_keeps_trial_counts():
    recs = [_rec(a, 16, i, 0) for i in range(7) for a in ("omp", "fcomp")]
    assert {r["algo"]: r["trials"] for r in bench.summarize(recs)} == {"omp": 7, "fcomp": 7}


def test_emit_outputs(tmp_path):
    spec = small_spec(tmp_path)
    recs = bench.run_experiment(spec)
    summary = bench.summarize(recs)
    paths = bench.emit_outputs(recs, summary, spec)
    with open(paths["raw"]) as f:
        assert f.readline().strip() == ("algo,n_star,trial,seed,time_total_ns,time_select_ns,"
                                        "time_refit_ns,time_correct_ns,misses,k")
    with open(paths["summary"]) as f:
        assert f.readline().strip() == "algo,n_star,trials,miss_rate,miss_ci95,time_median_ns,time_mean_ns"
    assert "svg_time" not in paths and not list((tmp_path / "out").glob("*.svg"))
    # summary recomputed from raw csv is exact
    assert bench.summarize(bench.read_raw_csv(paths["raw"])) == summary
    assert bench.read_summary_csv(paths["summary"]) == summary
    assert bench.ExperimentSpec.load(paths["manifest"]) == spec


def test_emit_svg(tmp_path):
    spec = small_spec(tmp_path, trials=1, svg=True)
    recs = bench.run_experiment(spec)
    paths = bench.emit_outputs(recs, bench.summarize(recs), spec)
    for key in ("svg_time", "svg_miss"):
        assert paths[key].read_text().lstrip().startswith("<?xml")


def test_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        bench.write_raw_csv([], blocker / "raw.csv")


def test_spec_validation():
    with pytest.raises(bench.ConfigError):
        bench.ExperimentSpec(trials=0).validate()
    with pytest.raises(bench.ConfigError):
        bench.ExperimentSpec(grid_sizes=[]).validate()
    with pytest.raises(bench.ConfigError):
        bench.ExperimentSpec(grid_sizes=[1]).validate()
    with pytest.raises(bench.ConfigError):
        bench.ExperimentSpec(algorithms=["lasso"]).validate()
    with pytest.raises(bench.ConfigError):
        bench.ExperimentSpec.from_dict({"trails": 3})
    with pytest.raises(bench.ConfigError):
        bench.ExperimentSpec.from_dict({"radar": {"B": -1}})


# -- CLI ---------------------------------------------------------------------------

def test_cli_run_and_summarize(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"K": 2, "trials": 5, "grid_sizes": [8], "algorithms": ["fomp"]}))
    out = tmp_path / "res"
    code = main(["run", "--config", str(cfg), "--algos", "fomp,fcomp", "--trials", "2",
                 "--grid-sizes", "8,16", "--seed", "3", "--out", str(out), "--svg"])
    assert code == 0
    spec = bench.ExperimentSpec.load(out / "manifest.json")
    assert spec.algorithms == ["fomp", "fcomp"] and spec.trials == 2 and spec.K == 2
    assert spec.grid_sizes == [8, 16] and spec.base_seed == 3
    assert (out / "time.svg").exists()
    assert main(["summarize", "--in", str(out / "raw.csv"), "--out", str(tmp_path / "s.csv")]) == 0
    assert (tmp_path / "s.csv").read_text() == (out / "summary.csv").read_text()


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["run", "--trials", "0", "--out", str(tmp_path)]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--trials", "1", "--grid-sizes", "8", "--algos", "fomp",
                 "--out", str(blocker / "sub")]) == 3
    assert main(["summarize", "--in", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "s.csv")]) == 3
