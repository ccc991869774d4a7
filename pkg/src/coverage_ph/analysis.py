"""Coverage statistics from persistence diagrams.

Only death values matter here: a class dying at ``t`` is a region where
voting (travel both ways plus waiting) takes more than ``t`` minutes. Essential
classes and zero-persistence pairs are left out of every statistic.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

log = logging.getLogger(__name__)

# Hyndman-Fan type 6: linear interpolation at rank p * (n + 1)
QUARTILE_METHOD = "weibull"


@dataclass(frozen=True)
class DiagramStats:
    region: str
    dim: int
    count: int
    median: float
    mean: float
    variance: float
    std: float
    essential: int = 0
    ddof: int = 0

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class CoverageHole:
    region: str
    dim: int
    death: float
    z: float
    site_ids: tuple
    lat: float
    lon: float
    vertex_lats: tuple = ()
    vertex_lons: tuple = ()


@dataclass(frozen=True)
class BoxSummary:
    region: str
    dim: int
    count: int
    min: float
    q1: float
    median: float
    q3: float
    max: float


def summarize_deaths(deaths, region="", dim=0, ddof=0, essential=0):
    deaths = np.asarray(deaths, dtype=float)
    if deaths.size == 0:
        nan = float("nan")
        return DiagramStats(region, dim, 0, nan, nan, nan, nan, essential, ddof)
    if deaths.size <= ddof:
        var = float("nan")
    else:
        var = float(np.var(deaths, ddof=ddof))
    return DiagramStats(
        region=region,
        dim=dim,
        count=int(deaths.size),
        median=float(np.median(deaths)),
        mean=float(np.mean(deaths)),
        variance=var,
        std=float(np.sqrt(var)),
        essential=essential,
        ddof=ddof,
    )


def death_stats(diagram, dim, region=None, ddof=0):
    """Median, mean, variance (minutes^2) and std of finite death values.

    ``ddof=0`` is the population convention used for z-scores.
    """
    region = region if region is not None else "+".join(diagram.regions)
    essential = diagram.essential_count(dim)
    if dim >= 1 and essential:
        log.warning("%s: %d essential dim-%d classes excluded from statistics", region, essential, dim)
    return summarize_deaths(diagram.deaths(dim), region, dim, ddof, essential)


def z_scores(deaths, stats):
    return (np.asarray(deaths, dtype=float) - stats.mean) / stats.std


def select_holes(diagram, dim, stats, z_threshold=1.0, locations=None):
    """Classes whose death z-score is at least ``z_threshold``, largest death first.

    ``locations`` maps each region label to ``(lat, lon)`` arrays aligned with
    the diagram's node ids; the hole sits at the mean of its death simplex's
    vertex coordinates.
    """
    if not stats.count or not stats.std > 0:
        log.warning("%s dim %d: zero spread in death values, no holes selected", stats.region, dim)
        return []
    idx = np.flatnonzero(diagram.mask(dim, include_zero=False, finite=True))
    z = z_scores(diagram.death[idx], stats)
    keep = idx[z >= z_threshold]
    zk = z[z >= z_threshold]
    holes = []
    for i, zi in zip(keep.tolist(), zk.tolist()):
        region = diagram.regions[int(diagram.region[i])]
        verts = [int(v) for v in diagram.death_simplex[i] if v >= 0]
        ids = diagram.simplex_ids(i)
        if locations is not None:
            lat, lon = locations[region]
            vl = tuple(float(lat[v]) for v in verts)
            vo = tuple(float(lon[v]) for v in verts)
            clat, clon = float(np.mean(vl)), float(np.mean(vo))
        else:
            vl = vo = ()
            clat = clon = float("nan")
        holes.append(CoverageHole(region, dim, float(diagram.death[i]), zi, ids, clat, clon, vl, vo))
    holes.sort(key=lambda h: (-h.death, h.region, h.site_ids))
    return holes


def box_summary(deaths, region="", dim=0, method=QUARTILE_METHOD):
    deaths = np.asarray(deaths, dtype=float)
    if deaths.size == 0:
        nan = float("nan")
        return BoxSummary(region, dim, 0, nan, nan, nan, nan, nan)
    q1, med, q3 = np.percentile(deaths, [25, 50, 75], method=method)
    return BoxSummary(region, dim, int(deaths.size), float(deaths.min()), float(q1), float(med), float(q3),
                      float(deaths.max()))


def compare_regions(diagrams, dims=(0, 1), method=QUARTILE_METHOD):
    """Per-dimension ranking of regions by median death, worst coverage first.

    ``diagrams`` maps a region name to its diagram. Ties keep alphabetical
    order. Returns a list of :class:`BoxSummary` grouped by dimension.
    """
    if len(diagrams) < 2:
        log.warning("comparison needs at least two regions, got %d", len(diagrams))
    rows = []
    for dim in dims:
        group = [box_summary(dg.deaths(dim), name, dim, method) for name, dg in sorted(diagrams.items())]
        group.sort(key=lambda r: -r.median if r.count else np.inf)
        rows.extend(group)
    return rows


def holes_geojson(holes, fmt=None):
    """FeatureCollection with a Point per hole and a Polygon per triangle hole."""
    fmt = fmt or (lambda x: x)
    features = []
    for h in holes:
        props = {
            "region": h.region,
            "dim": h.dim,
            "death_minutes": fmt(h.death),
            "z": fmt(h.z),
            "site_ids": list(h.site_ids),
        }
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [fmt(h.lon), fmt(h.lat)]},
            "properties": props,
        })
        if h.dim == 1 and len(h.vertex_lats) == 3:
            ring = [[fmt(lo), fmt(la)] for la, lo in zip(h.vertex_lats, h.vertex_lons)]
            ring.append(ring[0])
            features.append({
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": dict(props),
            })
    return {"type": "FeatureCollection", "features": features}
