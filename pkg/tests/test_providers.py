import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from coverage_ph.errors import BudgetExceededError, ProviderError
from coverage_ph.geo import knn_edges
from coverage_ph.io import ingest
from coverage_ph.providers import (
    FileProvider,
    HttpRoutingProvider,
    RoutingProvider,
    TravelTimeCache,
    fetch_travel_times,
)
from coverage_ph.config import RegionConfig


class CountingProvider(RoutingProvider):
    def __init__(self, fail_after=None, modes=("car", "public_transit")):
        self.calls = 0
        self.fail_after = fail_after
        self.modes = modes
        self.lock = threading.Lock()

    def available_modes(self):
        return self.modes

    def travel_time(self, origin, dest, mode):
        with self.lock:
            self.calls += 1
            if self.fail_after is not None and self.calls > self.fail_after:
                raise ProviderError("service unavailable")
        base = abs(origin.lat - dest.lat) * 1000 + abs(origin.lon - dest.lon) * 1000
        return base + (2.0 if mode == "public_transit" else 1.0)


@pytest.fixture
def places(city12):
    bundle = ingest(RegionConfig.from_dict({"label": "c", "data_dir": str(city12)}, "."))
    return bundle.places()


def test_sample_count_matches_graph(places, tmp_path):
    with TravelTimeCache(tmp_path / "c.csv") as cache:
        rep = fetch_travel_times(places, CountingProvider(), 3, cache, concurrency=3)
    edges = knn_edges([p[1] for p in places], [p[2] for p in places], 3)
    assert len(rep.samples) == 2 * 2 * len(edges) <= 2 * 2 * 12 * 3
    assert rep.requests == len(rep.samples) and rep.cache_hits == 0


def test_warm_cache_zero_requests(places, tmp_path):
    with TravelTimeCache(tmp_path / "c.csv") as cache:
        first = fetch_travel_times(places, CountingProvider(), 3, cache)
    prov = CountingProvider()
    with TravelTimeCache(tmp_path / "c.csv") as cache:
        second = fetch_travel_times(places, prov, 3, cache)
    assert prov.calls == 0 and second.requests == 0
    assert second.hit_rate == 1.0
    assert second.samples == first.samples


def test_cache_doubles_as_file_provider(places, tmp_path):
    with TravelTimeCache(tmp_path / "c.csv") as cache:
        first = fetch_travel_times(places, CountingProvider(), 3, cache)
    with TravelTimeCache(tmp_path / "other.csv") as cache:
        again = fetch_travel_times(places, FileProvider(tmp_path / "c.csv"), 3, cache)
    assert again.samples == first.samples


def test_resumable_after_failure(places, tmp_path):
    with TravelTimeCache(tmp_path / "c.csv") as cache:
        with pytest.raises(ProviderError):
            fetch_travel_times(places, CountingProvider(fail_after=20), 3, cache, concurrency=1, retries=0)
    partial = TravelTimeCache(tmp_path / "c.csv")
    assert len(partial.entries) == 20
    partial.close()
    prov = CountingProvider()
    with TravelTimeCache(tmp_path / "c.csv") as cache:
        resumed = fetch_travel_times(places, prov, 3, cache)
    with TravelTimeCache(tmp_path / "fresh.csv") as cache:
        clean = fetch_travel_times(places, CountingProvider(), 3, cache)
    assert resumed.samples == clean.samples
    assert prov.calls == len(clean.samples) - 20


def test_retries_then_success(places, tmp_path):
    class Flaky(CountingProvider):
        def travel_time(self, origin, dest, mode):
            with self.lock:
                self.calls += 1
                fail = self.calls % 2 == 1
            if fail:
                raise ProviderError("blip")
            return 1.0

    with TravelTimeCache(tmp_path / "c.csv") as cache:
        rep = fetch_travel_times(places[:3], Flaky(), 2, cache, concurrency=1, retries=1, backoff=0)
    assert len(rep.samples) == 12


def test_budget_guard_sends_nothing(places, tmp_path):
    prov = CountingProvider()
    with TravelTimeCache(tmp_path / "c.csv") as cache:
        with pytest.raises(BudgetExceededError):
            fetch_travel_times(places, prov, 3, cache, max_requests=10)
    assert prov.calls == 0
    assert not (tmp_path / "c.csv").exists()


def test_k_clamped_with_warning(places, tmp_path):
    with TravelTimeCache(tmp_path / "c.csv") as cache:
        rep = fetch_travel_times(places, CountingProvider(), 50, cache)
    assert rep.k == 11 and any("clamped" in w for w in rep.warnings)
    assert len(rep.samples) == 2 * 2 * 66


def test_missing_mode_skipped(places, tmp_path):
    with TravelTimeCache(tmp_path / "c.csv") as cache:
        rep = fetch_travel_times(places, CountingProvider(modes=("car",)), 3, cache)
    assert rep.skipped_modes == ("public_transit",)
    assert {s.mode for s in rep.samples} == {"car"}


class _Handler(BaseHTTPRequestHandler):
    seen = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        self.seen.append((body, self.headers.get("Authorization")))
        if body["mode"] == "public_transit" and body["origin"]["lat"] > 40.015:
            payload = {"duration_seconds": None}
        else:
            payload = {"duration_seconds": 60.0 * (1 + abs(body["origin"]["lat"] - body["destination"]["lat"]) * 100)}
        data = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    _Handler.seen = []
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/route", _Handler.seen
    server.shutdown()


def test_http_provider(places, tmp_path, stub_server, monkeypatch):
    url, seen = stub_server
    monkeypatch.setenv("TEST_ROUTING_KEY", "secret")
    prov = HttpRoutingProvider(url, api_key_env="TEST_ROUTING_KEY", timeout=5)
    with TravelTimeCache(tmp_path / "c.csv") as cache:
        rep = fetch_travel_times(places, prov, 3, cache, concurrency=4)
    assert len(seen) == rep.requests == len(rep.samples)
    assert all(auth == "Bearer secret" for _, auth in seen)
    assert set(seen[0][0]) == {"origin", "destination", "mode"}
    assert any(s.minutes == float("inf") for s in rep.samples)
    assert all(s.minutes >= 1.0 for s in rep.samples)


def test_http_failure_is_provider_error(places, tmp_path):
    prov = HttpRoutingProvider("http://127.0.0.1:9/none", timeout=0.5)
    with TravelTimeCache(tmp_path / "c.csv") as cache:
        with pytest.raises(ProviderError):
            fetch_travel_times(places[:2], prov, 1, cache, retries=1, backoff=0)


def test_adapter_override():
    class Seconds(HttpRoutingProvider):
        def parse_response(self, body):
            return body["route"]["secs"] / 60.0

    assert Seconds("http://x").parse_response({"route": {"secs": 120}}) == 2.0
