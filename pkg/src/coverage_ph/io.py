"""CSV/JSON/GeoJSON schemas, dataset ingestion, and output writers.

Readers collect every problem they find (with file name and line number)
and raise one :class:`ValidationError` at the end, so a corrupted dataset is
fully diagnosed in a single run.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distance_model import (
    MODES,
    BoundaryPoint,
    DirectedTravelSample,
    ResourceSite,
    ZipDemographics,
)
from .errors import ValidationError
from .geo import haversine_m
from .persistence import PersistenceDiagram, _pad

log = logging.getLogger(__name__)

SCHEMAS = {
    "sites": ("site_id", "lat", "lon", "zip"),
    "demographics": ("zip", "population", "voting_age_population", "vehicles"),
    "travel_times": ("origin_id", "dest_id", "mode", "minutes"),
    "walk_lengths": ("site_a", "site_b", "meters"),
    "wait_times": ("district_id", "wait_minutes"),
    "zip_districts": ("zip", "district_id"),
    "zip_overrides": ("site_id", "zip"),
    "boundary": ("seq", "lat", "lon", "zip"),
    "distances": ("site_a", "site_b", "minutes"),
    "weights": ("site_id", "wait_minutes"),
    "diagram": ("region", "dim", "birth_minutes", "death_minutes", "birth_vertices", "death_vertices"),
    "filtration": ("value", "dim", "v0", "v1", "v2"),
    "boxplot": ("region", "dim", "min", "q1", "median", "q3", "max"),
}


def fmt6(x):
    """Report formatting: 6 significant digits, ``inf`` spelled out."""
    return format(float(x), ".6g")


def round6(x):
    x = float(x)
    return x if not np.isfinite(x) else float(format(x, ".6g"))


def exact(x):
    """Round-trip float text for intermediate files."""
    return repr(float(x))


def parse_float(text):
    return float(text.strip())


# -- reading -----------------------------------------------------------------

def read_rows(path, kind, problems):
    """Rows of a CSV as ``(line_number, dict)``; header mismatches go to ``problems``."""
    path = Path(path)
    expected = SCHEMAS[kind]
    if not path.exists():
        problems.append(f"{path}: file not found")
        return []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != expected:
            problems.append(f"{path.name}: header {header} does not match {list(expected)}")
            return []
        rows = []
        for line, values in enumerate(reader, start=2):
            if not values or all(not v.strip() for v in values):
                continue
            if len(values) != len(expected):
                problems.append(f"{path.name} line {line}: expected {len(expected)} fields, got {len(values)}")
                continue
            rows.append((line, dict(zip(expected, (v.strip() for v in values)))))
        return rows


def _num(row, key, where, problems, nonneg=True, allow_inf=False):
    try:
        val = parse_float(row[key])
    except ValueError:
        problems.append(f"{where}: {key} {row[key]!r} is not a number")
        return None
    if np.isnan(val) or (np.isinf(val) and not allow_inf):
        problems.append(f"{where}: {key} {row[key]!r} is not finite")
        return None
    if nonneg and val < 0:
        problems.append(f"{where}: {key} {val} is negative")
        return None
    return val


def read_demographics(path, problems):
    out = {}
    for line, row in read_rows(path, "demographics", problems):
        where = f"{Path(path).name} line {line}"
        vals = [_num(row, k, where, problems) for k in ("population", "voting_age_population", "vehicles")]
        if None in vals:
            continue
        if row["zip"] in out:
            problems.append(f"{where}: duplicate zip {row['zip']}")
            continue
        out[row["zip"]] = ZipDemographics(row["zip"], *vals)
    return out


def read_wait_times(path, problems):
    out = {}
    for line, row in read_rows(path, "wait_times", problems):
        where = f"{Path(path).name} line {line}"
        val = _num(row, "wait_minutes", where, problems)
        if val is None:
            continue
        if row["district_id"] in out:
            problems.append(f"{where}: duplicate district {row['district_id']}")
            continue
        out[row["district_id"]] = val
    return out


def read_zip_districts(path, problems):
    out = {}
    for _, row in read_rows(path, "zip_districts", problems):
        out.setdefault(row["zip"], set()).add(row["district_id"])
    return out


def read_overrides(path, problems):
    out = {}
    if path is None:
        return out
    for line, row in read_rows(path, "zip_overrides", problems):
        if row["site_id"] in out:
            problems.append(f"{Path(path).name} line {line}: duplicate override for {row['site_id']}")
            continue
        out[row["site_id"]] = (line, row["zip"])
    return out


def read_travel_times(path, problems, known_ids=None):
    """Directed samples; ``inf`` minutes mean no route was found."""
    samples = {}
    name = Path(path).name
    for line, row in read_rows(path, "travel_times", problems):
        where = f"{name} line {line}"
        minutes = _num(row, "minutes", where, problems, allow_inf=True)
        if minutes is None:
            continue
        o, dst, mode = row["origin_id"], row["dest_id"], row["mode"]
        if mode not in MODES:
            problems.append(f"{where}: unknown mode {mode!r}")
            continue
        if o == dst:
            problems.append(f"{where}: origin equals destination ({o})")
            continue
        if known_ids is not None and (o not in known_ids or dst not in known_ids):
            problems.append(f"{where}: unknown site in {o} -> {dst}")
            continue
        key = (o, dst, mode)
        if key in samples:
            problems.append(f"{where}: duplicate sample {o} -> {dst} ({mode})")
            continue
        samples[key] = DirectedTravelSample(o, dst, mode, minutes)
    return samples


# -- ingestion ---------------------------------------------------------------

@dataclass
class DatasetBundle:
    label: str
    sites: list
    demographics: dict
    district_waits: dict
    zip_districts: dict
    walk_lengths: dict = field(default_factory=dict)
    boundary: list = field(default_factory=list)
    overrides_applied: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)

    @property
    def node_ids(self):
        return [s.site_id for s in self.sites] + [b.node_id for b in self.boundary]

    def places(self):
        """``(node_id, lat, lon)`` for every site then every boundary point."""
        return [(s.site_id, s.lat, s.lon) for s in self.sites] + [(b.node_id, b.lat, b.lon) for b in self.boundary]

    def locations(self):
        pl = self.places()
        return np.array([p[1] for p in pl]), np.array([p[2] for p in pl])


def ingest(region):
    """Read and cross-check one region's files (a :class:`~coverage_ph.config.RegionConfig`)."""
    problems = []
    demographics = read_demographics(region.demographics, problems)
    waits = read_wait_times(region.wait_times, problems)
    zip_districts = read_zip_districts(region.zip_districts, problems)
    overrides = read_overrides(region.zip_overrides, problems)
    sites_name = Path(region.sites).name

    sites, seen, applied = [], {}, {}
    for line, row in read_rows(region.sites, "sites", problems):
        where = f"{sites_name} line {line}"
        sid = row["site_id"]
        lat = _num(row, "lat", where, problems, nonneg=False)
        lon = _num(row, "lon", where, problems, nonneg=False)
        if not sid:
            problems.append(f"{where}: empty site_id")
            continue
        if sid in seen:
            problems.append(f"{where}: duplicate site_id {sid} (first on line {seen[sid]})")
            continue
        seen[sid] = line
        if lat is None or lon is None:
            continue
        if not -90 <= lat <= 90 or not -180 <= lon <= 180:
            problems.append(f"{where}: coordinates ({lat}, {lon}) out of range")
            continue
        zip_code = row["zip"]
        if sid in overrides:
            applied[sid] = (zip_code, overrides[sid][1])
            zip_code = overrides[sid][1]
        demo = demographics.get(zip_code)
        if demo is None:
            problems.append(f"{where}: unknown zip {zip_code} for site {sid}")
            continue
        if demo.population <= 0:
            problems.append(f"{where}: site {sid} has zero-population zip {zip_code} and no override")
            continue
        if not any(d in waits for d in zip_districts.get(zip_code, ())):
            problems.append(f"{where}: zip {zip_code} has no district with a wait estimate")
            continue
        sites.append(ResourceSite(sid, lat, lon, zip_code))
    for sid, (line, _) in overrides.items():
        if sid not in seen:
            problems.append(f"{Path(region.zip_overrides).name} line {line}: override for unknown site {sid}")

    boundary = []
    if region.boundary is not None:
        seqs = set()
        name = Path(region.boundary).name
        for line, row in read_rows(region.boundary, "boundary", problems):
            where = f"{name} line {line}"
            try:
                seq = int(row["seq"])
            except ValueError:
                problems.append(f"{where}: seq {row['seq']!r} is not an integer")
                continue
            lat = _num(row, "lat", where, problems, nonneg=False)
            lon = _num(row, "lon", where, problems, nonneg=False)
            if lat is None or lon is None:
                continue
            if seq in seqs:
                problems.append(f"{where}: duplicate seq {seq}")
                continue
            seqs.add(seq)
            if row["zip"] not in demographics:
                problems.append(f"{where}: unknown zip {row['zip']} for boundary point {seq}")
                continue
            boundary.append(BoundaryPoint(seq, lat, lon, row["zip"]))
        boundary.sort(key=lambda b: b.seq)
        if len(boundary) < 3 and not problems:
            problems.append(f"{name}: boundary needs at least 3 points, got {len(boundary)}")

    walk = {}
    if region.walk_lengths is not None:
        coords = {s.site_id: (s.lat, s.lon) for s in sites}
        coords.update({b.node_id: (b.lat, b.lon) for b in boundary})
        name = Path(region.walk_lengths).name
        for line, row in read_rows(region.walk_lengths, "walk_lengths", problems):
            where = f"{name} line {line}"
            meters = _num(row, "meters", where, problems)
            a, b = row["site_a"], row["site_b"]
            if meters is None:
                continue
            if a not in coords or b not in coords:
                problems.append(f"{where}: unknown site in pair ({a}, {b})")
                continue
            gc = float(haversine_m(*coords[a], *coords[b]))
            if meters + 1e-6 < gc:
                log.warning("%s: street length %.1f m below great-circle %.1f m", where, meters, gc)
            walk[(a, b)] = meters

    if problems:
        raise ValidationError(problems, context=f"region {region.label}")
    return DatasetBundle(
        label=region.label,
        sites=sites,
        demographics=demographics,
        district_waits=waits,
        zip_districts=zip_districts,
        walk_lengths=walk,
        boundary=boundary,
        overrides_applied=applied,
        files=region.files(),
    )


# -- writing -----------------------------------------------------------------

def _write_csv(path, kind, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCHEMAS[kind])
        w.writerows(rows)


def write_distances(path, model):
    ids = model.node_ids
    iu, ju = np.triu_indices(model.n, 1)
    vals = model.d[iu, ju]
    _write_csv(path, "distances", ((ids[i], ids[j], exact(v)) for i, j, v in zip(iu.tolist(), ju.tolist(), vals.tolist())))


def write_weights(path, model):
    _write_csv(path, "weights", ((nid, exact(w)) for nid, w in zip(model.node_ids, model.w.tolist())))


def read_weights(path):
    problems = []
    rows = read_rows(path, "weights", problems)
    if problems:
        raise ValidationError(problems)
    return [r["site_id"] for _, r in rows], np.array([float(r["wait_minutes"]) for _, r in rows])


def read_distances(path, node_ids):
    """Symmetric matrix over ``node_ids`` (order from weights.csv)."""
    pos = {nid: i for i, nid in enumerate(node_ids)}
    n = len(node_ids)
    d = np.full((n, n), np.nan)
    np.fill_diagonal(d, 0.0)
    problems = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != SCHEMAS["distances"]:
            raise ValidationError([f"{Path(path).name}: bad header {header}"])
        for line, (a, b, m) in enumerate(reader, start=2):
            if a not in pos or b not in pos:
                problems.append(f"{Path(path).name} line {line}: unknown node in ({a}, {b})")
                continue
            d[pos[a], pos[b]] = d[pos[b], pos[a]] = float(m)
    if np.isnan(d).any():
        problems.append(f"{Path(path).name}: {int(np.isnan(d).sum()) // 2} node pairs missing")
    if problems:
        raise ValidationError(problems)
    return d


def write_diagram(path, diagram, include_zero=False):
    idx = np.flatnonzero(diagram.mask(include_zero=include_zero))

    def verts(i, which):
        return ";".join(diagram.simplex_ids(i, which))

    rows = (
        (
            diagram.regions[int(diagram.region[i])],
            int(diagram.dim[i]),
            exact(diagram.birth[i]),
            exact(diagram.death[i]),
            verts(i, "birth"),
            verts(i, "death"),
        )
        for i in idx.tolist()
    )
    _write_csv(path, "diagram", rows)


def read_diagram(path, node_ids_by_region):
    """Diagram from diagram.csv; vertex ids are resolved against each region's node order."""
    problems = []
    rows = read_rows(path, "diagram", problems)
    if problems:
        raise ValidationError(problems)
    labels = list(node_ids_by_region)
    pos = {lab: {nid: i for i, nid in enumerate(ids)} for lab, ids in node_ids_by_region.items()}
    dims, births, deaths, bs, ds, regs = [], [], [], [], [], []
    for line, r in rows:
        lab = r["region"]
        if lab not in pos:
            problems.append(f"{Path(path).name} line {line}: unknown region {lab}")
            continue
        try:
            b = tuple(pos[lab][v] for v in r["birth_vertices"].split(";") if v)
            d = tuple(pos[lab][v] for v in r["death_vertices"].split(";") if v) or None
        except KeyError as exc:
            problems.append(f"{Path(path).name} line {line}: unknown node {exc}")
            continue
        dims.append(int(r["dim"]))
        births.append(float(r["birth_minutes"]))
        deaths.append(float(r["death_minutes"]))
        bs.append(b)
        ds.append(d)
        regs.append(labels.index(lab))
    if problems:
        raise ValidationError(problems)
    return PersistenceDiagram(
        np.array(dims, dtype=np.int64), np.array(births, dtype=float), np.array(deaths, dtype=float),
        _pad(bs), _pad(ds), np.array(regs, dtype=np.int64), tuple(labels),
        tuple(tuple(node_ids_by_region[lab]) for lab in labels),
    )


def write_filtration(path, filtration):
    def row(s):
        v = list(s.vertices) + [""] * (3 - len(s.vertices))
        return (exact(s.value), s.dim, *v)

    _write_csv(path, "filtration", (row(s) for s in filtration.simplices))


def write_boxplot(path, rows):
    _write_csv(path, "boxplot", ((r.region, r.dim, fmt6(r.min), fmt6(r.q1), fmt6(r.median), fmt6(r.q3), fmt6(r.max))
                                 for r in rows))


def _clean(obj):
    if isinstance(obj, float):
        if np.isnan(obj):
            return None
        if np.isinf(obj):
            return "inf"
        return round6(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path, obj, round_floats=True):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = _clean(obj) if round_floats else obj
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_stats(path, stats):
    records = []
    for s in stats:
        rec = dict(s) if isinstance(s, dict) else s.as_dict()
        rec["variance_units"] = "minutes^2"
        records.append(rec)
    write_json(path, {"stats": records})
