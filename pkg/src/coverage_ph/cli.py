"""Command-line entry point: ``coverage-ph <stage> --config run.json``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import load_config
from .errors import ConfigurationError, CoverageError

STAGES = ("ingest", "fetch", "distances", "ph", "analyze", "pipeline")

def _truncation(text):
    if text in ("auto", "none"):
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected auto, none or minutes, got {text!r}")

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    common.add_argument("--region", action="append", dest="regions", metavar="LABEL",
                        help="restrict per-region stages to these labels (repeatable)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    g = common.add_argument_group("config overrides")
    g.add_argument("--v-walk", type=float)
    g.add_argument("--knn-k", type=int)
    g.add_argument("--z-threshold", type=float)
    g.add_argument("--circuity-factor", type=float)
    g.add_argument("--truncation", type=_truncation)
    g.add_argument("--cache-dir", type=Path)
    g.add_argument("--max-requests", type=int)
    g.add_argument("--concurrency", type=int)
    g.add_argument("--retries", type=int)
    g.add_argument("--std-ddof", type=int, choices=(0, 1))
    g.add_argument("--max-triangles", type=int)
    g.add_argument("--dump-filtration", action="store_true", default=None)

    parser = argparse.ArgumentParser(prog="coverage-ph", description="Coverage holes from travel-time persistence.")
    sub = parser.add_subparsers(dest="stage", required=True)
    helps = {
        "ingest": "validate region datasets",
        "fetch": "fetch k-NN travel times into the cache",
        "distances": "write distances.csv and weights.csv per region",
        "ph": "compute a persistence diagram per region",
        "analyze": "merge per city and write stats, holes and box-plot data",
        "pipeline": "run every stage",
    }
    for stage in STAGES:
        sub.add_parser(stage, parents=[common], help=helps[stage])
    return parser

def _overrides(args):
    keys = ("v_walk", "knn_k", "z_threshold", "circuity_factor", "truncation", "max_requests",
            "concurrency", "retries", "std_ddof", "max_triangles", "dump_filtration")
    out = {k: getattr(args, k) for k in keys}
    if args.cache_dir is not None:
        out["cache_dir"] = str(args.cache_dir.resolve())
    return out

def _regions(cfg, labels):
    if not labels:
        return cfg.regions
    return [cfg.region(lab) for lab in labels]

def _per_region(cfg, args, work):
    failures = []
    for region in _regions(cfg, args.regions):
        try:
            work(region)
        except CoverageError as exc:
            print(f"{region.label}: {exc}", file=sys.stderr)
            failures.append(pipeline.exit_code_for(exc))
    if not failures:
        return pipeline.EXIT_OK
    if len(failures) < len(_regions(cfg, args.regions)):
        return pipeline.EXIT_PARTIAL
    return min(failures)

def run(args):
    cfg = load_config(args.config, **_overrides(args))
    out = args.out

    if args.stage == "pipeline":
        code, results = pipeline.run_pipeline(cfg, out)
        for r in results:
            print(f"{r.city}: {r.status}" + (f" ({r.error.splitlines()[0]})" if r.error else ""))
        return code
    if args.stage == "analyze":
        code, results = pipeline.analyze_existing(cfg, out)
        print(f"wrote {out / 'stats.json'}, {out / 'holes.geojson'}, {out / 'boxplot.csv'}")
        return code

    def ingest(region):
        bundle = pipeline.stage_ingest(cfg, region)
        print(f"{region.label}: {len(bundle.sites)} sites, {len(bundle.boundary)} boundary points, "
              f"{len(bundle.overrides_applied)} zip overrides")

    def fetch(region):
        bundle = pipeline.stage_ingest(cfg, region)
        rep = pipeline.stage_fetch(cfg, region, bundle)
        print(f"{region.label}: {len(rep.samples)} samples, {rep.requests} requests, "
              f"{rep.cache_hits} cache hits")
        return bundle, rep

    def distances(region):
        bundle, rep = fetch(region)
        model = pipeline.stage_distances(cfg, region, bundle, rep.samples, out)
        print(f"{region.label}: {model.n} nodes -> {pipeline.region_dir(out, region.label)}")

    def ph(region):
        dg = pipeline.stage_ph(cfg, region, out)
        print(f"{region.label}: {len(dg)} pairs")

    return _per_region(cfg, args, {"ingest": ingest, "fetch": fetch, "distances": distances, "ph": ph}[args.stage])

def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return pipeline.EXIT_VALIDATION
    except CoverageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return pipeline.exit_code_for(exc)

if __name__ == "__main__":
    sys.exit(main())
