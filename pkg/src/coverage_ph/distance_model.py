"""Travel-time dissimilarity between resource sites and per-site wait weights.

The dissimilarity combines walking, driving and public-transit round trips,
mixes them by the local share of people with car access, and symmetrizes the
result with zip-code populations. Vertex weights are waiting times.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .errors import ConfigurationError, ValidationError
from .geo import knn_edges, pairwise_haversine_m

log = logging.getLogger(__name__)

V_WALK_M_PER_MIN = 85.2
KNN_K = 25
CIRCUITY_FACTOR = 1.3
MODES = ("car", "public_transit")
BOUNDARY_PREFIX = "boundary:"


@dataclass(frozen=True)
class ResourceSite:
    site_id: str
    lat: float
    lon: float
    zip: str

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError([f"site {self.site_id}: lat {self.lat} outside [-90, 90]"])
        if not -180.0 <= self.lon <= 180.0:
            raise ValidationError([f"site {self.site_id}: lon {self.lon} outside [-180, 180]"])


@dataclass(frozen=True)
class BoundaryPoint:
    seq: int
    lat: float
    lon: float
    zip: str

    @property
    def node_id(self) -> str:
        return f"{BOUNDARY_PREFIX}{self.seq}"


@dataclass(frozen=True)
class ZipDemographics:
    zip: str
    population: float
    voting_age_population: float
    vehicles: float

    def __post_init__(self):
        for name in ("population", "voting_age_population", "vehicles"):
            if getattr(self, name) < 0:
                raise ValidationError([f"zip {self.zip}: negative {name}"])


@dataclass(frozen=True)
class DirectedTravelSample:
    origin_id: str
    dest_id: str
    mode: str
    minutes: float


@dataclass(frozen=True)
class DistanceModel:
    """Symmetric dissimilarity ``d`` (minutes) and vertex weights ``w``.

    Node order is ``node_ids``; boundary nodes (if any) follow the sites.
    ``d_tilde`` keeps the directed expected round trips the matrix came from.
    """

    node_ids: tuple
    lat: np.ndarray
    lon: np.ndarray
    d: np.ndarray
    w: np.ndarray
    is_boundary: np.ndarray
    d_tilde: np.ndarray | None = None
    warnings: tuple = field(default=())

    def __post_init__(self):
        n = len(self.node_ids)
        if self.d.shape != (n, n) or self.w.shape != (n,):
            raise ValueError("distance matrix / weight vector shape mismatch")

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @property
    def has_boundary(self) -> bool:
        return bool(self.is_boundary.any())

    def index(self, node_id: str) -> int:
        return self.node_ids.index(node_id)


def walk_time(length_m, v_walk=V_WALK_M_PER_MIN):
    """Round-trip walking minutes for a one-way street path of ``length_m`` meters."""
    if v_walk <= 0:
        raise ConfigurationError(f"walking speed must be positive, got {v_walk}")
    return 2.0 * length_m / v_walk


def walk_length_matrix(node_ids, lat, lon, lengths=None, circuity_factor=CIRCUITY_FACTOR):
    """Street-path lengths for all pairs, falling back to circuity-scaled great-circle distance."""
    if circuity_factor <= 0:
        raise ConfigurationError(f"circuity factor must be positive, got {circuity_factor}")
    L = pairwise_haversine_m(lat, lon) * circuity_factor
    if lengths:
        pos = {nid: i for i, nid in enumerate(node_ids)}
        for (a, b), meters in lengths.items():
            if a in pos and b in pos:
                i, j = pos[a], pos[b]
                L[i, j] = L[j, i] = float(meters)
    np.fill_diagonal(L, 0.0)
    return L


def mode_round_trips(n, edges, one_way):
    """Round-trip times from directed edge weights on a fixed undirected graph.

    ``one_way`` maps ``(i, j)`` to minutes for every direction of every edge in
    ``edges``. One-way times between arbitrary pairs are shortest weighted
    paths; the round trip is the sum of both one-way times.
    """
    rows, cols, vals = [], [], []
    for i, j in edges:
        for a, b in ((i, j), (j, i)):
            t = one_way[(a, b)]
            if np.isfinite(t):
                rows.append(a)
                cols.append(b)
                vals.append(float(t))
    graph = sp.csr_matrix(
        (np.asarray(vals, dtype=float), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(n, n),
    )
    dist = dijkstra(graph, directed=True)
    return dist + dist.T


def complete_mode_times(node_ids, lat, lon, samples, k=KNN_K, edges=None):
    """Round-trip matrix for one travel mode from k-NN directed samples.

    Every edge of the k-nearest-neighbour graph must have a sample in both
    directions; extra samples off the graph are ignored.
    """
    if edges is None:
        edges = knn_edges(lat, lon, k)
    pos = {nid: i for i, nid in enumerate(node_ids)}
    one_way = {}
    for s in samples:
        if s.origin_id in pos and s.dest_id in pos:
            one_way[(pos[s.origin_id], pos[s.dest_id])] = s.minutes
    missing = [
        f"{node_ids[a]} -> {node_ids[b]}"
        for i, j in edges
        for a, b in ((i, j), (j, i))
        if (a, b) not in one_way
    ]
    if missing:
        mode = samples[0].mode if samples else "?"
        raise ValidationError(missing, context=f"missing {mode} travel samples for graph edges")
    return mode_round_trips(len(node_ids), edges, one_way)


def car_fraction(demo: ZipDemographics, default=0.0, warnings=None):
    """Share of voting-age people with car access, clamped to [0, 1]."""
    if demo.voting_age_population <= 0:
        msg = f"zip {demo.zip}: zero voting-age population, using car fraction {default}"
        log.warning(msg)
        if warnings is not None:
            warnings.append(msg)
        return float(default)
    return min(1.0, demo.vehicles / demo.voting_age_population)


def _weighted(coef, values):
    # 0 * inf must contribute 0, not nan
    with np.errstate(invalid="ignore"):
        return np.where(coef == 0, 0.0, coef * values)


def expected_round_trip(t_car, t_pub, t_walk, car_share):
    """Expected round trip for a resident choosing the fastest available mode."""
    t_car, t_pub, t_walk, c = np.broadcast_arrays(
        np.asarray(t_car, float), np.asarray(t_pub, float), np.asarray(t_walk, float), np.asarray(car_share, float)
    )
    with_car = np.minimum(np.minimum(t_car, t_walk), t_pub)
    without = np.minimum(t_walk, t_pub)
    out = _weighted(c, with_car) + _weighted(1.0 - c, without)
    return out if out.ndim else float(out)


def symmetrize(dt_xy, dt_yx, pop_x, pop_y, zips=None):
    """Population-weighted average of the two directed round trips."""
    dt_xy, dt_yx, pop_x, pop_y = np.broadcast_arrays(
        np.asarray(dt_xy, float), np.asarray(dt_yx, float), np.asarray(pop_x, float), np.asarray(pop_y, float)
    )
    total = pop_x + pop_y
    if np.any(total <= 0):
        where = zips if zips is not None else "unknown zips"
        raise ValidationError([f"both zip populations are zero ({where})"])
    out = (_weighted(pop_x, dt_xy) + _weighted(pop_y, dt_yx)) / total
    return out if out.ndim else float(out)


def waiting_time(zip_code, district_waits, zip_districts):
    """Unweighted mean wait over the districts overlapping a zip."""
    districts = [d for d in sorted(zip_districts.get(zip_code, ())) if d in district_waits]
    if not districts:
        raise ValidationError([f"zip {zip_code}: no district with a wait estimate"])
    return float(np.mean([district_waits[d] for d in districts]))


def boundary_extend(d, d_tilde, populations, n_sites, zips=None):
    """Extend a site-site matrix with discretized boundary points.

    Nodes ``0..n_sites-1`` are sites and the rest are boundary points in
    polyline order. Site-boundary distances use twice the population-weighted
    average; adjacent boundary points (cyclically) are at 0, others at inf.
    """
    n = d_tilde.shape[0]
    m = n - n_sites
    if m < 3:
        raise ValidationError([f"boundary needs at least 3 points, got {m}"])
    pops = np.asarray(populations, float)
    out = np.full((n, n), np.inf)
    out[:n_sites, :n_sites] = d[:n_sites, :n_sites]
    xs = np.arange(n_sites)
    ys = np.arange(n_sites, n)
    px = pops[xs][:, None]
    py = pops[ys][None, :]
    if np.any(px + py <= 0):
        bad = np.argwhere(px + py <= 0)[0]
        where = None if zips is None else (zips[xs[bad[0]]], zips[ys[bad[1]]])
        raise ValidationError([f"both zip populations are zero ({where})"])
    xy = 2.0 * (_weighted(px, d_tilde[np.ix_(xs, ys)]) + _weighted(py, d_tilde[np.ix_(ys, xs)].T)) / (px + py)
    out[np.ix_(xs, ys)] = xy
    out[np.ix_(ys, xs)] = xy.T
    for a in range(m):
        b = (a + 1) % m
        out[n_sites + a, n_sites + b] = out[n_sites + b, n_sites + a] = 0.0
    np.fill_diagonal(out, 0.0)
    return out


def build_distance_model(
    sites,
    demographics,
    samples,
    district_waits,
    zip_districts,
    walk_lengths=None,
    boundary=None,
    v_walk=V_WALK_M_PER_MIN,
    knn_k=KNN_K,
    circuity_factor=CIRCUITY_FACTOR,
    default_car_fraction=0.0,
):
    """Compose the travel-time pieces into a :class:`DistanceModel`.

    ``demographics`` maps zip to :class:`ZipDemographics`; ``samples`` is an
    iterable of :class:`DirectedTravelSample` over sites and boundary nodes.
    All data problems are collected and raised together.
    """
    boundary = list(boundary or [])
    node_ids = [s.site_id for s in sites] + [b.node_id for b in boundary]
    zips = [s.zip for s in sites] + [b.zip for b in boundary]
    lat = np.array([s.lat for s in sites] + [b.lat for b in boundary], dtype=float)
    lon = np.array([s.lon for s in sites] + [b.lon for b in boundary], dtype=float)
    n_sites = len(sites)
    n = len(node_ids)

    problems = []
    if len(set(node_ids)) != n:
        problems.append("duplicate node ids")
    for nid, z in zip(node_ids, zips):
        if z not in demographics:
            problems.append(f"{nid}: zip {z} missing from demographics")
    warn = []
    waits = np.zeros(n)
    for i, s in enumerate(sites):
        try:
            waits[i] = waiting_time(s.zip, district_waits, zip_districts)
        except ValidationError as exc:
            problems.extend(f"{s.site_id}: {p}" for p in exc.problems)
    by_mode = {mode: [] for mode in MODES}
    for s in samples:
        if s.mode not in by_mode:
            problems.append(f"unknown travel mode {s.mode!r}")
            continue
        by_mode[s.mode].append(s)
    edges = knn_edges(lat, lon, knn_k) if n > 1 else []
    mode_times = {}
    for mode, rows in by_mode.items():
        if not rows:
            if n > 1:
                msg = f"no {mode} samples; treating {mode} as unavailable"
                log.warning(msg)
                warn.append(msg)
            mode_times[mode] = np.full((n, n), np.inf)
            np.fill_diagonal(mode_times[mode], 0.0)
            continue
        try:
            mode_times[mode] = complete_mode_times(node_ids, lat, lon, rows, knn_k, edges=edges)
        except ValidationError as exc:
            problems.extend(f"{exc.context}: {p}" for p in exc.problems)
    if problems:
        raise ValidationError(problems, context="distance model")

    pops = np.array([demographics[z].population for z in zips], dtype=float)
    share = np.array([car_fraction(demographics[z], default_car_fraction, warn) for z in zips])
    t_walk = walk_time(walk_length_matrix(node_ids, lat, lon, walk_lengths, circuity_factor), v_walk)
    d_tilde = expected_round_trip(mode_times["car"], mode_times["public_transit"], t_walk, share[:, None])
    np.fill_diagonal(d_tilde, 0.0)

    site_block = np.ix_(np.arange(n_sites), np.arange(n_sites))
    dt = d_tilde[site_block]
    p = pops[:n_sites]
    upper = np.triu_indices(n_sites, 1)
    try:
        vals = symmetrize(dt[upper], dt.T[upper], p[upper[0]], p[upper[1]])
    except ValidationError:
        bad = [
            f"{node_ids[i]} (zip {zips[i]}) / {node_ids[j]} (zip {zips[j]})"
            for i, j in zip(*upper)
            if p[i] + p[j] <= 0
        ]
        raise ValidationError(bad, context="both zip populations are zero")
    d = np.zeros((n_sites, n_sites))
    d[upper] = vals
    d = d + d.T
    if boundary:
        d = boundary_extend(d, d_tilde, pops, n_sites, zips)
    return DistanceModel(
        node_ids=tuple(node_ids),
        lat=lat,
        lon=lon,
        d=d,
        w=waits,
        is_boundary=np.arange(n) >= n_sites,
        d_tilde=d_tilde,
        warnings=tuple(warn),
    )
