"""Seeded synthetic city datasets in the ingest schemas.

Travel times are a noisy function of great-circle distance: driving at
``car_speed`` km/min plus a parking overhead, transit at ``pub_speed`` plus a
headway wait. Each direction gets independent noise, so times are asymmetric.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distance_model import KNN_K, MODES
from .geo import haversine_m, knn_edges
from .io import SCHEMAS, exact


@dataclass
class SyntheticCity:
    label: str
    n_sites: int
    seed: int = 0
    center: tuple = (41.88, -87.63)
    spread_deg: float = 0.12
    zip_grid: int = 4
    car_speed: float = 0.5
    pub_speed: float = 0.3
    knn_k: int = KNN_K


def _write(path, kind, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCHEMAS[kind])
        w.writerows(rows)


def write_synthetic_city(spec: SyntheticCity, data_dir):
    """Write sites, demographics, waits, zip-district and travel-time files; returns the directory."""
    rng = np.random.default_rng(spec.seed)
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    n = spec.n_sites
    lat = spec.center[0] + rng.uniform(-spec.spread_deg, spec.spread_deg, n)
    lon = spec.center[1] + rng.uniform(-spec.spread_deg, spec.spread_deg, n)

    g = spec.zip_grid
    cell_i = np.clip(((lat - lat.min()) / (np.ptp(lat) + 1e-12) * g).astype(int), 0, g - 1)
    cell_j = np.clip(((lon - lon.min()) / (np.ptp(lon) + 1e-12) * g).astype(int), 0, g - 1)
    zips = [f"{spec.label[:2].upper()}{i * g + j:03d}" for i, j in zip(cell_i, cell_j)]
    ids = [f"{spec.label}-{i:05d}" for i in range(n)]
    _write(data_dir / "sites.csv", "sites",
           ((sid, exact(a), exact(o), z) for sid, a, o, z in zip(ids, lat, lon, zips)))

    zip_codes = sorted(set(zips))
    demo = []
    for z in zip_codes:
        pop = int(rng.integers(5_000, 60_000))
        voting = int(pop * rng.uniform(0.6, 0.85))
        vehicles = int(voting * rng.uniform(0.2, 1.1))
        demo.append((z, pop, voting, vehicles))
    _write(data_dir / "demographics.csv", "demographics", demo)

    districts = [f"D{k}" for k in range(max(2, len(zip_codes) // 2))]
    _write(data_dir / "wait_times.csv", "wait_times",
           ((dist, exact(round(float(rng.uniform(2, 40)), 2))) for dist in districts))
    zd = []
    for idx, z in enumerate(zip_codes):
        zd.append((z, districts[idx % len(districts)]))
        if idx % 3 == 0:
            zd.append((z, districts[(idx + 1) % len(districts)]))
    _write(data_dir / "zip_districts.csv", "zip_districts", zd)

    rows = []
    k = min(spec.knn_k, n - 1)
    for a, b in knn_edges(lat, lon, k):
        km = float(haversine_m(lat[a], lon[a], lat[b], lon[b])) / 1000.0
        for o, t in ((a, b), (b, a)):
            car = km / spec.car_speed + 3.0 + rng.exponential(1.0)
            pub = km / spec.pub_speed + 8.0 + rng.exponential(4.0)
            for mode, minutes in zip(MODES, (car, pub)):
                rows.append((ids[o], ids[t], mode, exact(round(minutes, 4))))
    rows.sort()
    _write(data_dir / "travel_times.csv", "travel_times", rows)
    return data_dir


def write_config(path, cities, **settings):
    """Config JSON for regions ``[(label, city, data_dir), ...]``; ``data_dir`` relative to the config."""
    path = Path(path)
    cfg = dict(settings)
    cfg["regions"] = [{"label": lab, "city": city, "data_dir": str(d)} for lab, city, d in cities]
    path.write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
