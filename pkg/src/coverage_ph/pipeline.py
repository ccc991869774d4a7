"""Stage functions and the end-to-end runner.

Output layout under ``out``::

    regions/<label>/distances.csv, weights.csv, diagram.csv[, filtration.csv]
    cities/<city>/diagram.csv
    stats.json, holes.geojson, boxplot.csv, manifest.json

Each city runs its regions sequentially; cities run concurrently and a
failing city does not stop the others.
"""

from __future__ import annotations

import hashlib
import logging
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import box_summary, compare_regions, death_stats, holes_geojson, select_holes
from .distance_model import build_distance_model
from .errors import ConfigurationError, CoverageError, ProviderError, ValidationError
from .filtration import rips_filtration
from .io import (
    fmt6,
    ingest,
    read_diagram,
    read_distances,
    read_weights,
    round6,
    write_boxplot,
    write_diagram,
    write_distances,
    write_filtration,
    write_json,
    write_stats,
    write_weights,
)
from .persistence import merge_diagrams, reduce
from .providers import TravelTimeCache, fetch_travel_times, make_provider

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2
EXIT_PROVIDER = 3
EXIT_PARTIAL = 4
DIMS = (0, 1)


def region_dir(out, label):
    return Path(out) / "regions" / label


def city_dir(out, city):
    return Path(out) / "cities" / city


# -- stages ------------------------------------------------------------------

def stage_ingest(cfg, region):
    bundle = ingest(region)
    log.info("%s: %d sites, %d boundary points", region.label, len(bundle.sites), len(bundle.boundary))
    return bundle


def stage_fetch(cfg, region, bundle, provider=None):
    provider = provider or make_provider(cfg.provider, region)
    with TravelTimeCache(Path(cfg.cache_dir) / f"{region.label}.csv") as cache:
        report = fetch_travel_times(
            bundle.places(), provider, cfg.knn_k, cache,
            max_requests=cfg.max_requests, concurrency=cfg.concurrency,
            retries=cfg.retries, backoff=cfg.backoff,
        )
    log.info("%s: %d requests, cache hit rate %.3f", region.label, report.requests, report.hit_rate)
    return report


def stage_distances(cfg, region, bundle, samples, out):
    model = build_distance_model(
        bundle.sites, bundle.demographics, samples, bundle.district_waits, bundle.zip_districts,
        walk_lengths=bundle.walk_lengths, boundary=bundle.boundary, v_walk=cfg.v_walk,
        knn_k=cfg.knn_k, circuity_factor=cfg.circuity_factor,
        default_car_fraction=cfg.default_car_fraction,
    )
    rdir = region_dir(out, region.label)
    write_distances(rdir / "distances.csv", model)
    write_weights(rdir / "weights.csv", model)
    return model


def stage_ph(cfg, region, out):
    """Diagram of one region from its distances.csv and weights.csv."""
    rdir = region_dir(out, region.label)
    node_ids, w = read_weights(rdir / "weights.csv")
    d = read_distances(rdir / "distances.csv", node_ids)
    filt = rips_filtration(d, w, truncation=cfg.truncation, node_ids=tuple(node_ids),
                           max_triangles=cfg.max_triangles)
    diagram = reduce(filt, label=region.label)
    write_diagram(rdir / "diagram.csv", diagram)
    if cfg.dump_filtration:
        write_filtration(rdir / "filtration.csv", filt)
    log.info("%s: %d pairs (threshold %s)", region.label, len(diagram), fmt6(filt.threshold))
    return diagram


def load_region_diagram(out, label):
    rdir = region_dir(out, label)
    node_ids, _ = read_weights(rdir / "weights.csv")
    return read_diagram(rdir / "diagram.csv", {label: node_ids})


@dataclass
class CityResult:
    city: str
    regions: list
    diagram: object = None
    locations: dict = field(default_factory=dict)
    status: str = "ok"
    error: str | None = None
    exit_code: int = EXIT_OK
    fetch: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)


def merge_city(out, city, labels):
    merged = merge_diagrams([load_region_diagram(out, lab) for lab in labels])
    write_diagram(city_dir(out, city) / "diagram.csv", merged)
    return merged


def stage_analyze(cfg, out, results):
    """stats.json, holes.geojson and boxplot.csv over every successful city."""
    out = Path(out)
    stats_rows, holes, diagrams = [], [], {}
    for res in results:
        if res.status != "ok":
            continue
        dg = res.diagram
        diagrams[res.city] = dg
        for dim in DIMS:
            st = death_stats(dg, dim, region=res.city, ddof=cfg.std_ddof)
            stats_rows.append(_stats_record(st, "city", res.city))
            holes.extend(select_holes(dg, dim, st, cfg.z_threshold, res.locations))
            if len(dg.regions) > 1:
                for r, label in enumerate(dg.regions):
                    sub = dg.select(dg.region == r)
                    stats_rows.append(
                        _stats_record(death_stats(sub, dim, region=label, ddof=cfg.std_ddof), "region", res.city)
                    )
    holes.sort(key=lambda h: (-h.death, h.region, h.site_ids))
    if len(diagrams) >= 2:
        boxes = compare_regions(diagrams, DIMS)
    else:
        boxes = [box_summary(dg.deaths(dim), name, dim) for name, dg in diagrams.items() for dim in DIMS]
    write_stats(out / "stats.json", stats_rows)
    write_json(out / "holes.geojson", holes_geojson(holes, fmt=round6), round_floats=False)
    write_boxplot(out / "boxplot.csv", boxes)
    return stats_rows, holes, boxes


def _stats_record(stats, scope, city):
    rec = stats.as_dict()
    rec["scope"] = scope
    rec["city"] = city
    return rec


# -- runner ------------------------------------------------------------------

def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def samples_digest(samples):
    h = hashlib.sha256()
    for s in samples:
        h.update(f"{s.origin_id},{s.dest_id},{s.mode},{s.minutes!r}\n".encode())
    return h.hexdigest()


def exit_code_for(exc):
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    if isinstance(exc, ProviderError):
        return EXIT_PROVIDER
    return EXIT_ERROR


def run_city(cfg, city, regions, out, providers=None):
    res = CityResult(city, [r.label for r in regions])
    try:
        for region in regions:
            bundle = stage_ingest(cfg, region)
            res.inputs[region.label] = {
                name: sha256_file(path) for name, path in sorted(region.files().items()) if Path(path).exists()
            }
            lat, lon = bundle.locations()
            res.locations[region.label] = (lat, lon)
            provider = (providers or {}).get(region.label)
            report = stage_fetch(cfg, region, bundle, provider)
            res.fetch[region.label] = {
                "requests": report.requests,
                "cache_hits": report.cache_hits,
                "samples": len(report.samples),
                "samples_sha256": samples_digest(report.samples),
                "k": report.k,
                "skipped_modes": list(report.skipped_modes),
            }
            stage_distances(cfg, region, bundle, report.samples, out)
            stage_ph(cfg, region, out)
        res.diagram = merge_city(out, city, res.regions)
    except CoverageError as exc:
        log.error("city %s failed: %s", city, exc)
        res.status, res.error, res.exit_code = "failed", str(exc), exit_code_for(exc)
    return res


def versions():
    import numba
    import scipy

    return {
        "coverage_ph": __version__,
        "numba": numba.__version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "scipy": scipy.__version__,
    }


def write_manifest(cfg, out, results):
    manifest = {
        "config": cfg.as_dict(),
        "versions": versions(),
        "cities": {
            r.city: {
                "status": r.status,
                "error": r.error,
                "regions": r.regions,
                "inputs": r.inputs,
                "fetch": r.fetch,
                "pairs": None if r.diagram is None else len(r.diagram),
            }
            for r in results
        },
        "outputs": {
            name: sha256_file(Path(out) / name)
            for name in ("stats.json", "holes.geojson", "boxplot.csv")
            if (Path(out) / name).exists()
        },
    }
    write_json(Path(out) / "manifest.json", manifest, round_floats=False)
    return manifest


def overall_exit(results):
    failed = [r for r in results if r.status != "ok"]
    if not failed:
        return EXIT_OK
    if len(failed) < len(results):
        return EXIT_PARTIAL
    codes = {r.exit_code for r in failed}
    for code in (EXIT_VALIDATION, EXIT_PROVIDER):
        if codes == {code}:
            return code
    return min(codes - {EXIT_ERROR}, default=EXIT_ERROR)


def run_pipeline(cfg, out, providers=None):
    """Run every city; returns ``(exit_code, results)``.

    ``providers`` optionally maps region labels to provider instances (used by
    tests); otherwise each region gets the configured provider.
    """
    if not cfg.regions:
        raise ConfigurationError("config lists no regions")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cities = cfg.cities()
    workers = max(1, min(len(cities), os.cpu_count() or 1))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_city, cfg, city, regions, out, providers) for city, regions in cities.items()]
        results = [f.result() for f in futures]
    stage_analyze(cfg, out, results)
    write_manifest(cfg, out, results)
    code = overall_exit(results)
    log.info("pipeline finished with exit code %d", code)
    return code, results


def analyze_existing(cfg, out):
    """Merge region diagrams already on disk and write the reports (the ``analyze`` subcommand)."""
    results = []
    for city, regions in cfg.cities().items():
        res = CityResult(city, [r.label for r in regions])
        try:
            for region in regions:
                bundle = stage_ingest(cfg, region)
                res.locations[region.label] = bundle.locations()
            res.diagram = merge_city(out, city, res.regions)
        except (CoverageError, OSError) as exc:
            log.error("city %s failed: %s", city, exc)
            code = exit_code_for(exc) if isinstance(exc, CoverageError) else EXIT_ERROR
            res.status, res.error, res.exit_code = "failed", str(exc), code
        results.append(res)
    stage_analyze(cfg, out, results)
    write_manifest(cfg, out, results)
    return overall_exit(results), results
