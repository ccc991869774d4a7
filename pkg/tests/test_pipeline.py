import json
import shutil

import numpy as np
import pytest

from coverage_ph.cli import main
from coverage_ph.config import config_from_dict, load_config
from coverage_ph.filtration import rips_filtration
from coverage_ph.io import read_distances, read_weights
from coverage_ph.oracle import multiset, naive_reduce
from coverage_ph.pipeline import (
    EXIT_OK,
    EXIT_PARTIAL,
    EXIT_PROVIDER,
    EXIT_VALIDATION,
    load_region_diagram,
    run_pipeline,
)
from coverage_ph.synthetic import SyntheticCity, write_config, write_synthetic_city

from test_providers import CountingProvider

GOLDEN_FILES = {
    "regions/city12/distances.csv": "distances.csv",
    "regions/city12/weights.csv": "weights.csv",
    "regions/city12/diagram.csv": "diagram.csv",
    "cities/Fixture/diagram.csv": "city_diagram.csv",
    "stats.json": "stats.json",
    "holes.geojson": "holes.geojson",
    "boxplot.csv": "boxplot.csv",
}


def run_fixture(city12, tmp_path, **overrides):
    cfg = load_config(city12 / "run.json", cache_dir=str(tmp_path / "cache"), **overrides)
    code, results = run_pipeline(cfg, tmp_path / "out")
    return code, results, tmp_path / "out"


def test_golden_outputs(city12, tmp_path):
    code, _, out = run_fixture(city12, tmp_path)
    assert code == EXIT_OK
    for produced, golden in GOLDEN_FILES.items():
        assert (out / produced).read_bytes() == (city12 / "golden" / golden).read_bytes(), produced


def test_rerun_byte_identical(city12, tmp_path):
    _, _, out = run_fixture(city12, tmp_path)
    first = {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}
    shutil.rmtree(out)
    shutil.rmtree(tmp_path / "cache")
    run_fixture(city12, tmp_path)
    second = {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}
    assert first == second
    assert "manifest.json" in {str(p) for p in first}


def test_fixture_diagram_matches_oracle(city12, tmp_path):
    _, _, out = run_fixture(city12, tmp_path)
    ids, w = read_weights(out / "regions/city12/weights.csv")
    d = read_distances(out / "regions/city12/distances.csv", ids)
    ref = naive_reduce(rips_filtration(d, w))
    ref_nonzero = [p for p in multiset(ref) if p[1] != p[2]]
    dg = load_region_diagram(out, "city12")
    assert dg.multiset(include_zero=False) == ref_nonzero


def test_truncation_none_matches_auto(city12, tmp_path):
    run_fixture(city12, tmp_path / "a")
    run_fixture(city12, tmp_path / "b", truncation="none")
    a = json.loads((tmp_path / "a/out/stats.json").read_text())
    b = json.loads((tmp_path / "b/out/stats.json").read_text())
    assert a == b


def test_manifest_contents(city12, tmp_path):
    _, _, out = run_fixture(city12, tmp_path)
    m = json.loads((out / "manifest.json").read_text())
    assert set(m) == {"config", "versions", "cities", "outputs"}
    city = m["cities"]["Fixture"]
    assert city["status"] == "ok"
    assert len(city["inputs"]["city12"]["sites"]) == 64
    assert city["fetch"]["city12"]["k"] == 3
    assert m["config"]["knn_k"] == 3
    assert {"numpy", "scipy", "numba", "coverage_ph"} <= set(m["versions"])


def three_region_config(tmp_path):
    for k, (lab, center) in enumerate([("bronx", (40.85, -73.87)), ("brooklyn", (40.65, -73.95)),
                                       ("queens", (40.72, -73.80))]):
        write_synthetic_city(SyntheticCity(lab, 25 + 5 * k, seed=k, center=center, spread_deg=0.04, knn_k=6),
                             tmp_path / "data" / lab)
    write_synthetic_city(SyntheticCity("solo", 20, seed=9, knn_k=6), tmp_path / "data" / "solo")
    regions = [(lab, "NYC", f"data/{lab}") for lab in ("bronx", "brooklyn", "queens")]
    regions.append(("solo", "Solo", "data/solo"))
    return write_config(tmp_path / "run.json", regions, knn_k=6, cache_dir="cache")


def test_three_region_merge(tmp_path):
    cfg = load_config(three_region_config(tmp_path))
    code, results = run_pipeline(cfg, tmp_path / "out")
    assert code == EXIT_OK
    nyc = next(r for r in results if r.city == "NYC")
    parts = [load_region_diagram(tmp_path / "out", lab) for lab in ("bronx", "brooklyn", "queens")]
    assert len(nyc.diagram) == sum(len(p) for p in parts)
    assert nyc.diagram.essential_count(0) == 3
    stats = json.loads((tmp_path / "out/stats.json").read_text())["stats"]
    scopes = {(s["scope"], s["region"]) for s in stats}
    assert ("city", "NYC") in scopes and ("region", "queens") in scopes and ("city", "Solo") in scopes
    box = (tmp_path / "out/boxplot.csv").read_text().splitlines()
    assert box[0] == "region,dim,min,q1,median,q3,max" and len(box) == 5


def test_city_failure_isolated(tmp_path):
    cfg_path = three_region_config(tmp_path)
    (tmp_path / "data/queens/wait_times.csv").unlink()
    code, results = run_pipeline(load_config(cfg_path), tmp_path / "out")
    assert code == EXIT_PARTIAL
    status = {r.city: r.status for r in results}
    assert status == {"NYC": "failed", "Solo": "ok"}
    stats = json.loads((tmp_path / "out/stats.json").read_text())["stats"]
    assert {s["city"] for s in stats} == {"Solo"}
    m = json.loads((tmp_path / "out/manifest.json").read_text())
    assert "wait_times.csv" in m["cities"]["NYC"]["error"]


def test_all_failed_validation_exit(tmp_path):
    cfg_path = three_region_config(tmp_path)
    for lab in ("queens", "solo"):
        (tmp_path / f"data/{lab}/sites.csv").write_text("id,lat\n")
    assert run_pipeline(load_config(cfg_path), tmp_path / "out")[0] == EXIT_VALIDATION


def test_provider_failure_exit(city12, tmp_path):
    regions = [{"label": "city12", "city": "Fixture", "data_dir": str(city12)}]
    cfg = config_from_dict({"regions": regions, "knn_k": 3, "retries": 0,
                            "provider": {"type": "http", "url": "http://127.0.0.1:9/none", "timeout": 0.5}},
                           base_dir=tmp_path)
    assert run_pipeline(cfg, tmp_path / "out")[0] == EXIT_PROVIDER


def test_budget_exceeded_exit(city12, tmp_path):
    code, results, _ = run_fixture(city12, tmp_path, max_requests=5)
    assert code == EXIT_PROVIDER and "budget" in results[0].error


def test_boundary_region(city12, tmp_path):
    data = tmp_path / "data"
    shutil.copytree(city12, data, ignore=shutil.ignore_patterns("golden", "run.json"))
    (data / "boundary.csv").write_text(
        "seq,lat,lon,zip\n0,39.99,-75.01,Z1\n1,39.99,-74.95,Z1\n2,40.03,-74.95,Z3\n3,40.03,-75.01,Z3\n"
    )
    regions = [{"label": "b", "city": "B", "data_dir": "data", "boundary": "boundary.csv"}]
    cfg = config_from_dict({"regions": regions, "knn_k": 4, "dump_filtration": True}, base_dir=tmp_path)
    code, results = run_pipeline(cfg, tmp_path / "out", providers={"b": CountingProvider()})
    assert code == EXIT_OK
    ids, w = read_weights(tmp_path / "out/regions/b/weights.csv")
    assert ids[-4:] == ["boundary:0", "boundary:1", "boundary:2", "boundary:3"] and w[-4:].tolist() == [0] * 4
    assert "inf" in (tmp_path / "out/regions/b/distances.csv").read_text()
    assert (tmp_path / "out/regions/b/filtration.csv").exists()
    # boundary points are mutually connected, so one component overall
    assert results[0].diagram.essential_count(0) == 1


def test_cli_stages_match_pipeline(city12, tmp_path, capsys):
    base = ["--config", str(city12 / "run.json"), "--cache-dir", str(tmp_path / "cache")]
    assert main(["pipeline", *base, "--out", str(tmp_path / "full")]) == 0
    staged = ["--out", str(tmp_path / "staged")]
    for stage in ("ingest", "fetch", "distances", "ph", "analyze"):
        assert main([stage, *base, *staged]) == 0, stage
    for name in ("stats.json", "holes.geojson", "boxplot.csv", "regions/city12/diagram.csv"):
        assert (tmp_path / "full" / name).read_bytes() == (tmp_path / "staged" / name).read_bytes()
    assert "12 sites" in capsys.readouterr().out


def test_cli_flag_override_and_bad_config(city12, tmp_path):
    base = ["--config", str(city12 / "run.json"), "--cache-dir", str(tmp_path / "cache"), "--out", str(tmp_path / "o")]
    assert main(["pipeline", *base, "--z-threshold", "0.5"]) == 0
    m = json.loads((tmp_path / "o/manifest.json").read_text())
    assert m["config"]["z_threshold"] == 0.5
    bad = tmp_path / "bad.json"
    bad.write_text('{"knn_k": 0, "regions": []}')
    assert main(["ingest", "--config", str(bad)]) == EXIT_VALIDATION


def test_cli_ingest_reports_validation(city12, tmp_path, capsys):
    data = tmp_path / "data"
    shutil.copytree(city12, data, ignore=shutil.ignore_patterns("golden", "run.json"))
    (data / "zip_overrides.csv").unlink()
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"regions": [{"label": "x", "data_dir": "data"}]}))
    assert main(["ingest", "--config", str(cfg)]) == EXIT_VALIDATION
    assert "zero-population" in capsys.readouterr().err
