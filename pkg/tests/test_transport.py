from __future__ import annotations

import concurrent.futures
import threading

import pytest
from hypothesis import given, strategies as st

from patchtrace.errors import TransportError
from patchtrace.transport import (
    CachingTransport,
    FixtureDir,
    ReplayTransport,
    Response,
    Transport,
    TransportMode,
    TransportPolicy,
    entry_digest,
    open_transport,
    request_key,
)

from fakeweb import FakeWeb
from scenarios import worked_example_scenario


def _response(url: str, body: bytes = b"hello", status: int = 200) -> Response:
    return Response(status=status, body=body, headers={"Content-Type": "text/plain"}, url=url, origin="live")


class _FailingTransport(Transport):
    def _fetch(self, method, url, body):
        raise AssertionError("live transport must not be reached")


class _CountingTransport(Transport):
    def __init__(self):
        super().__init__()
        self.calls = 0

    def _fetch(self, method, url, body):
        self.calls += 1
        return _response(url, b"fresh")


def test_replay_returns_recorded_body(tmp_path):
    fixtures = FixtureDir(tmp_path)
    key = request_key("GET", "https://example.com/a")
    fixtures.write(key, _response("https://example.com/a", b"recorded"))
    transport = ReplayTransport(tmp_path)
    response = transport.get("https://example.com/a")
    assert response.body == b"recorded"
    assert response.origin == "replay"


def test_replay_miss_is_transport_error(tmp_path):
    transport = ReplayTransport(tmp_path)
    with pytest.raises(TransportError, match="replay miss"):
        transport.get("https://example.com/missing")


def test_cache_returns_cached_body_without_live_hit(tmp_path):
    key = request_key("GET", "https://example.com/x")
    FixtureDir(tmp_path).write(key, _response("https://example.com/x", b"cached"))
    transport = CachingTransport(tmp_path, _FailingTransport())
    assert transport.get("https://example.com/x").body == b"cached"


def test_cache_miss_fetches_then_caches(tmp_path):
    inner = _CountingTransport()
    transport = CachingTransport(tmp_path, inner)
    assert transport.get("https://example.com/y").body == b"fresh"
    assert transport.get("https://example.com/y").body == b"fresh"
    assert inner.calls == 1


def test_key_includes_normalized_url_and_body_hash():
    a = request_key("GET", "https://Example.com/a?utm_source=x")
    b = request_key("GET", "https://example.com/a")
    assert a == b
    assert request_key("POST", "https://example.com/a") != a
    assert request_key("GET", "https://example.com/a", b"body") != a


@given(
    path_a=st.text(alphabet="abcdef0123456789/", min_size=1, max_size=24),
    path_b=st.text(alphabet="abcdef0123456789/", min_size=1, max_size=24),
)
def test_distinct_normalized_urls_never_collide(path_a, path_b):
    from patchtrace.urls import normalize_url

    url_a = f"https://host.example/{path_a}"
    url_b = f"https://host.example/{path_b}"
    if normalize_url(url_a, sort_query=True) == normalize_url(url_b, sort_query=True):
        assert request_key("GET", url_a) == request_key("GET", url_b)
    else:
        assert request_key("GET", url_a) != request_key("GET", url_b)
        assert entry_digest(request_key("GET", url_a)) != entry_digest(
            request_key("GET", url_b)
        )


def test_fixture_entry_rejects_key_mismatch(tmp_path):
    fixtures = FixtureDir(tmp_path)
    key = request_key("GET", "https://example.com/real")
    fixtures.write(key, _response("https://example.com/real"))
    digest = entry_digest(key)
    meta_path = tmp_path / f"{digest}.json"
    content = meta_path.read_text().replace(key, "GET https://tampered/ 00")
    meta_path.write_text(content)
    with pytest.raises(TransportError, match="different key"):
        FixtureDir(tmp_path).read(key)


def test_replay_deterministic_across_concurrent_schedules(tmp_path):
    scenario = worked_example_scenario()
    recorder = CachingTransport(tmp_path, FakeWeb(scenario))
    urls = [
        "https://nvd.nist.gov/feeds/json/cve/1.1/nvdcve-1.1-2017.json.gz",
        "https://www.kb.cert.org/vuls/id/475445",
        "https://github.com/crewjam/saml/issues/140",
        "https://github.com/crewjam/saml/issues/163",
    ]
    for url in urls:
        recorder.get(url)

    def run_schedule(order: list[str]) -> list[bytes]:
        transport = ReplayTransport(tmp_path)
        with concurrent.futures.ThreadPoolExecutor(max_workers=4) as pool:
            bodies = dict(
                zip(order, pool.map(lambda u: transport.get(u).body, order))
            )
        return [bodies[u] for u in urls]

    first = run_schedule(urls)
    second = run_schedule(list(reversed(urls)))
    assert first == second


def test_concurrent_cache_writes_serialize_per_key(tmp_path):
    inner = _CountingTransport()
    transport = CachingTransport(tmp_path, inner)
    barrier = threading.Barrier(4)

    def hit():
        barrier.wait()
        return transport.get("https://example.com/same").body

    with concurrent.futures.ThreadPoolExecutor(max_workers=4) as pool:
        bodies = list(pool.map(lambda _: hit(), range(4)))
    assert set(bodies) == {b"fresh"}
    assert ReplayTransport(tmp_path).get("https://example.com/same").body == b"fresh"


def test_open_transport_modes(tmp_path):
    assert isinstance(
        open_transport(TransportPolicy(mode=TransportMode.REPLAY_ONLY, cache_dir=tmp_path)),
        ReplayTransport,
    )
    assert isinstance(
        open_transport(
            TransportPolicy(mode=TransportMode.CACHE_THEN_LIVE, cache_dir=tmp_path)
        ),
        CachingTransport,
    )
    with pytest.raises(TransportError):
        open_transport(TransportPolicy(mode=TransportMode.REPLAY_ONLY))


def test_rate_limited_detection():
    from patchtrace.transport import LiveTransport

    assert LiveTransport._is_rate_limited(429, {})
    assert LiveTransport._is_rate_limited(403, {"X-RateLimit-Remaining": "0"})
    assert not LiveTransport._is_rate_limited(403, {"X-RateLimit-Remaining": "10"})
    assert not LiveTransport._is_rate_limited(200, {})


class _StubHttpResponse:
    def __init__(self, status_code: int, content: bytes = b"ok", headers=None):
        self.status_code = status_code
        self.content = content
        self.headers = headers or {}


def test_live_transport_sends_github_auth_and_retries_rate_limit(monkeypatch):
    from patchtrace.transport import LiveTransport

    calls = []

    def fake_request(method, url, data=None, headers=None, timeout=None):
        calls.append({"method": method, "url": url, "headers": headers})
        if len(calls) < 3:
            return _StubHttpResponse(429)
        return _StubHttpResponse(200, b"payload", {"Content-Type": "text/plain"})

    import requests

    monkeypatch.setattr(requests, "request", fake_request)
    monkeypatch.setattr("time.sleep", lambda _s: None)

    policy = TransportPolicy(
        rate_limit=100000, auth_tokens={"api.github.com": "tok123"}
    )
    transport = LiveTransport(policy)
    response = transport.get("https://api.github.com/repos/o/r/branches?page=1")
    assert response.status == 200
    assert response.body == b"payload"
    assert len(calls) == 3  # two rate-limited attempts, then success
    assert calls[0]["headers"]["Authorization"] == "Bearer tok123"
    assert "Accept" in calls[0]["headers"]


def test_live_transport_rate_limit_exhausts_after_retries(monkeypatch):
    from patchtrace.errors import RateLimitedError
    from patchtrace.transport import LiveTransport

    import requests

    monkeypatch.setattr(
        requests, "request", lambda *a, **k: _StubHttpResponse(429)
    )
    monkeypatch.setattr("time.sleep", lambda _s: None)

    transport = LiveTransport(TransportPolicy(rate_limit=100000))
    with pytest.raises(RateLimitedError):
        transport.get("https://api.github.com/search/commits?q=x")


def test_live_transport_connection_error_is_transport_error(monkeypatch):
    from patchtrace.transport import LiveTransport

    import requests

    def boom(*args, **kwargs):
        raise requests.ConnectionError("refused")

    monkeypatch.setattr(requests, "request", boom)
    transport = LiveTransport(TransportPolicy(rate_limit=100000))
    with pytest.raises(TransportError, match="refused"):
        transport.get("https://example.com/x")


def test_host_throttle_spaces_requests():
    from patchtrace.transport import _HostThrottle

    throttle = _HostThrottle(rate_limit=60)  # one per second
    import time

    start = time.monotonic()
    throttle.acquire("example.com")
    first = time.monotonic() - start
    assert first < 0.1  # first slot immediate
    # second host is independent: also immediate
    start = time.monotonic()
    throttle.acquire("other.com")
    assert time.monotonic() - start < 0.1
