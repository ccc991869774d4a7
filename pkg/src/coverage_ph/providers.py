"""Routing providers, the travel-time cache, and k-NN sample fetching.

A provider answers one directed request ``(origin, destination, mode)`` with
minutes (``inf`` when no route exists). Every answer is appended to the cache
before it is used; the cache is a travel_times.csv, so a warm cache can also
serve as a file provider.
"""

from __future__ import annotations

import csv
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import requests

from .distance_model import MODES, DirectedTravelSample
from .errors import BudgetExceededError, ProviderError, ValidationError
from .geo import knn_edges
from .io import SCHEMAS, exact, read_travel_times

log = logging.getLogger(__name__)


class Place(NamedTuple):
    node_id: str
    lat: float
    lon: float


class RoutingProvider:
    """Interface: directed travel time in minutes between two places."""

    def available_modes(self):
        return MODES

    def travel_time(self, origin: Place, dest: Place, mode: str) -> float:
        raise NotImplementedError


class FileProvider(RoutingProvider):
    """Looks travel times up in a travel_times.csv table."""

    def __init__(self, path):
        problems = []
        self.path = Path(path)
        self.table = read_travel_times(self.path, problems)
        if problems:
            raise ValidationError(problems, context=f"travel table {self.path.name}")
        self.modes = tuple(m for m in MODES if any(k[2] == m for k in self.table))

    def available_modes(self):
        return self.modes

    def travel_time(self, origin, dest, mode):
        try:
            return self.table[(origin.node_id, dest.node_id, mode)].minutes
        except KeyError:
            raise ProviderError(f"{self.path.name} has no {mode} time for {origin.node_id} -> {dest.node_id}")


class HttpRoutingProvider(RoutingProvider):
    """Generic JSON routing service.

    POSTs ``{"origin": {"lat", "lon"}, "destination": {"lat", "lon"}, "mode"}``
    and reads ``{"duration_seconds": float | null}``. Override
    :meth:`build_payload` / :meth:`parse_response` to adapt another service.
    The API key, if any, is read from the environment and sent as a bearer token.
    """

    def __init__(self, url, api_key_env="ROUTING_API_KEY", timeout=30.0, session=None):
        self.url = url
        self.timeout = timeout
        self.api_key = os.environ.get(api_key_env) if api_key_env else None
        self._local = threading.local()
        self._session = session

    def _get_session(self):
        if self._session is not None:
            return self._session
        if not hasattr(self._local, "session"):
            self._local.session = requests.Session()
        return self._local.session

    def build_payload(self, origin, dest, mode):
        return {
            "origin": {"lat": origin.lat, "lon": origin.lon},
            "destination": {"lat": dest.lat, "lon": dest.lon},
            "mode": mode,
        }

    def parse_response(self, body):
        seconds = body.get("duration_seconds")
        if seconds is None:
            return float("inf")
        return float(seconds) / 60.0

    def travel_time(self, origin, dest, mode):
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = self._get_session().post(
                self.url, json=self.build_payload(origin, dest, mode), headers=headers, timeout=self.timeout
            )
            resp.raise_for_status()
            return self.parse_response(resp.json())
        except (requests.RequestException, ValueError, KeyError) as exc:
            raise ProviderError(f"routing request {origin.node_id} -> {dest.node_id} ({mode}) failed: {exc}")


class TravelTimeCache:
    """Append-only CSV cache keyed by (origin_id, dest_id, mode). Writes are serialized."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._fh = None
        self.entries = {}
        if self.path.exists():
            problems = []
            self.entries = read_travel_times(self.path, problems)
            if problems:
                raise ValidationError(problems, context=f"cache {self.path}")

    def __contains__(self, key):
        return key in self.entries

    def get(self, key):
        return self.entries[key]

    def put(self, sample: DirectedTravelSample):
        with self._lock:
            if self._fh is None:
                new = not self.path.exists() or self.path.stat().st_size == 0
                self.path.parent.mkdir(parents=True, exist_ok=True)
                self._fh = open(self.path, "a", newline="", encoding="utf-8")
                self._writer = csv.writer(self._fh, lineterminator="\n")
                if new:
                    self._writer.writerow(SCHEMAS["travel_times"])
            self._writer.writerow((sample.origin_id, sample.dest_id, sample.mode, exact(sample.minutes)))
            self._fh.flush()
            self.entries[(sample.origin_id, sample.dest_id, sample.mode)] = sample

    def close(self):
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class FetchReport:
    samples: list
    requests: int
    cache_hits: int
    edges: int
    k: int
    modes: tuple
    skipped_modes: tuple = ()
    warnings: list = field(default_factory=list)

    @property
    def hit_rate(self):
        total = self.requests + self.cache_hits
        return self.cache_hits / total if total else 1.0


def fetch_travel_times(places, provider, k, cache, modes=MODES, max_requests=None, concurrency=4,
                       retries=3, backoff=0.5):
    """Directed samples (both directions, every mode) for each k-NN edge.

    Cached entries are reused. Raises :class:`BudgetExceededError` before any
    request if more than ``max_requests`` would be sent, and
    :class:`ProviderError` if a request still fails after ``retries``; samples
    fetched until then stay in the cache, so a rerun resumes.
    """
    places = [Place(*p) for p in places]
    warnings = []
    n = len(places)
    if n > 1 and k > n - 1:
        msg = f"k={k} exceeds n-1={n - 1}; clamped"
        log.warning(msg)
        warnings.append(msg)
        k = n - 1
    edges = knn_edges([p.lat for p in places], [p.lon for p in places], k) if n > 1 else []
    offered = set(provider.available_modes())
    use_modes = tuple(m for m in modes if m in offered)
    skipped = tuple(m for m in modes if m not in offered)
    for m in skipped:
        msg = f"provider offers no {m} times; mode treated as unavailable"
        log.warning(msg)
        warnings.append(msg)

    wanted = [
        (places[a], places[b], mode)
        for mode in use_modes
        for i, j in edges
        for a, b in ((i, j), (j, i))
    ]
    missing = [q for q in wanted if (q[0].node_id, q[1].node_id, q[2]) not in cache]
    hits = len(wanted) - len(missing)
    if max_requests is not None and len(missing) > max_requests:
        raise BudgetExceededError(f"{len(missing)} requests needed, budget is {max_requests}")

    def fetch_one(q):
        origin, dest, mode = q
        for attempt in range(retries + 1):
            try:
                minutes = provider.travel_time(origin, dest, mode)
                break
            except ProviderError:
                if attempt == retries:
                    raise
                time.sleep(backoff * 2**attempt)
        if minutes < 0:
            raise ProviderError(f"negative travel time {minutes} for {origin.node_id} -> {dest.node_id}")
        sample = DirectedTravelSample(origin.node_id, dest.node_id, mode, float(minutes))
        cache.put(sample)
        return sample

    sent = 0
    if missing:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            futures = [pool.submit(fetch_one, q) for q in missing]
            try:
                for fut in as_completed(futures):
                    fut.result()
                    sent += 1
            except ProviderError:
                for f in futures:
                    f.cancel()
                raise
    samples = sorted(
        (cache.get((q[0].node_id, q[1].node_id, q[2])) for q in wanted),
        key=lambda s: (s.mode, s.origin_id, s.dest_id),
    )
    log.info("fetched %d samples: %d requests, %d cache hits", len(samples), sent, hits)
    return FetchReport(samples, sent, hits, len(edges), k, use_modes, skipped, warnings)


def make_provider(provider_cfg, region):
    if provider_cfg.type == "http":
        return HttpRoutingProvider(provider_cfg.url, provider_cfg.api_key_env, provider_cfg.timeout)
    path = provider_cfg.path or region.travel_times
    if path is None:
        raise ValidationError([f"region {region.label}: file provider needs a travel_times.csv"])
    return FileProvider(path)
