import json
import os

import numpy as np
import pytest

from keplaw import pipeline as pl
from keplaw.errors import DataError

TINY = dict(epochs=300, budget=100, workers=1)


def test_config_text():
    values = pl.parse_config_text("# run\nseed = 7\nbudget=50  # small\nfigures = no\nrestart-after = 9\n")
    assert values == {"seed": 7, "budget": 50, "figures": False, "restart_after": 9}
    cfg = pl.RunConfig(**values)
    assert cfg.search_config().restart_after == 9
    assert cfg.train_config().seed == 7
    for bad in ("nonsense = 1", "seed 7", "seed = seven", "figures = maybe"):
        with pytest.raises(DataError):
            pl.parse_config_text(bad)


def test_table_round_trip(tmp_path):
    path = tmp_path / "t.csv"
    cols = {"a": np.array([0.1, 1 / 3]), "b": np.array([1e-300, -2.0])}
    pl.write_table(path, cols, {"note": "x: y"})
    again, meta = pl.read_table(path)
    assert meta == {"note": "x: y"}
    assert all(np.array_equal(again[k], cols[k]) for k in cols)
    path.write_text("a,b\n1,2\n3\n")
    with pytest.raises(DataError):
        pl.read_table(path)


def test_ingest_outputs(tmp_path):
    res = pl.ingest(pl.load_catalog(), tmp_path)
    r_cols, r_meta = pl.read_table(res["r_of_theta"])
    t_cols, t_meta = pl.read_table(res["theta_of_t"])
    assert len(r_cols["x"]) == 28 and len(t_cols["x"]) == 28
    assert r_cols["y"].min() == 0.0 and r_cols["y"].max() == 1.0
    assert np.all(np.diff(t_cols["theta_rad"]) > 0)
    assert r_meta["input"] == "theta_rad" and t_meta["target"] == "theta_rad"
    assert (tmp_path / "validation.txt").read_text().startswith("rows: 28")


def test_empty_catalog(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("# nothing here\n")
    with pytest.raises(DataError, match="empty catalog"):
        pl.load_catalog(str(path))


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("runs")
    out = []
    for name in ("a", "b"):
        cfg = pl.RunConfig(out=str(base / name), seed=7, **TINY)
        out.append((cfg, pl.run(cfg)))
    return out


def test_same_seed_gives_identical_report(two_runs):
    (ca, ra), (cb, rb) = two_runs
    assert ra["report"] == rb["report"]
    a = open(os.path.join(ca.out, "report.txt"), "rb").read()
    b = open(os.path.join(cb.out, "report.txt"), "rb").read()
    assert a == b


def test_every_artifact_is_reproduced(two_runs):
    (ca, _), (cb, _) = two_runs
    ma = json.load(open(os.path.join(ca.out, "manifest.json")))
    mb = json.load(open(os.path.join(cb.out, "manifest.json")))
    assert ma["artifacts"] == mb["artifacts"]
    assert ma["seed"] == 7 and ma["config"]["budget"] == 100


def test_manifest_hashes_match_files(two_runs):
    cfg, _ = two_runs[0]
    manifest = json.load(open(os.path.join(cfg.out, "manifest.json")))
    expected = {"r_of_theta.csv", "theta_of_t.csv", "r_model.json", "theta_model.json", "r_augmented.csv",
                "theta_augmented.csv", "r_archive.csv", "w2_archive.csv", "kinematics.csv", "r_pareto.csv",
                "w2_pareto.csv", "report.txt", "constants.csv", "fig_orbit.png", "fig_power_law.png"}
    assert expected <= set(manifest["artifacts"])
    for name, digest in manifest["artifacts"].items():
        assert pl.sha256(os.path.join(cfg.out, name)) == digest


def test_figures_are_png(two_runs):
    cfg, _ = two_runs[0]
    for name in ("fig_orbit.png", "fig_r_pareto.png", "fig_longitude.png", "fig_w2_pareto.png",
                 "fig_power_law.png"):
        with open(os.path.join(cfg.out, name), "rb") as fh:
            assert fh.read(8) == b"\x89PNG\r\n\x1a\n"


def test_report_sections(two_runs):
    _, res = two_runs[0]
    report = res["report"]
    for needle in ("selected r(theta) law", "selected omega^2 law", "point mean of r^3 omega^2",
                   "c/(4 pi^2)", "r^2 omega", "not a derivation of Kepler's third law"):
        assert needle in report
    series = open(os.path.join(two_runs[0][0].out, "r_pareto.csv")).read().splitlines()
    assert series[0] == "size,neg_log_error"


def test_stage_failure_keeps_partial_artifacts(tmp_path):
    cat = tmp_path / "bad.csv"
    cat.write_text("1582/11/23 16:00,90.7,1.58852,1,30\n1582/12/26 08:30,95.0,1.6,0,0\n")
    cfg = pl.RunConfig(catalog=str(cat), out=str(tmp_path / "run"), **TINY)
    with pytest.raises(pl.StageError) as info:
        pl.run(cfg)
    assert info.value.stage == "fit-nn r(theta)"
    assert (tmp_path / "run" / "r_of_theta.csv").exists()
