"""Pluggable HTTP transport: live, read-through cache, and replay fixtures.

Every fetched exchange is addressable by a deterministic key built from the
method, the normalized URL, and a hash of the request body. A recorded trace
is a directory with one metadata JSON file and one raw body file per entry,
so a cache directory written by CacheThenLive mode replays as-is in
ReplayOnly mode.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping
from urllib.parse import urlsplit

from .errors import RateLimitedError, TransportError
from .urls import normalize_url

FIXTURE_SCHEMA = "fixture@1"


class TransportMode(str, Enum):
    LIVE = "live"
    CACHE_THEN_LIVE = "cache"
    REPLAY_ONLY = "replay"


@dataclass
class TransportPolicy:
    mode: TransportMode = TransportMode.LIVE
    cache_dir: Path | str | None = None
    rate_limit: int = 120  # requests per minute per host
    auth_tokens: Mapping[str, str] = field(default_factory=dict)
    timeout: float = 30.0

    def __post_init__(self) -> None:
        if self.rate_limit < 1:
            raise ValueError("rate_limit must be >= 1")
        if isinstance(self.mode, str) and not isinstance(self.mode, TransportMode):
            self.mode = TransportMode(self.mode)
        if self.cache_dir is not None:
            self.cache_dir = Path(self.cache_dir)


@dataclass
class Response:
    status: int
    body: bytes
    headers: dict[str, str]
    url: str
    origin: str  # "live" | "cache" | "replay" | "fake"

    @property
    def text(self) -> str:
        return self.body.decode("utf-8", errors="replace")

    def json(self):
        try:
            return json.loads(self.body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise TransportError(f"response from {self.url} is not JSON: {exc}") from exc


@dataclass(frozen=True)
class FetchRecord:
    method: str
    url: str
    status: int
    origin: str

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "url": self.url,
            "status": self.status,
            "origin": self.origin,
        }


def request_key(method: str, url: str, body: bytes = b"") -> str:
    """Deterministic cache key: method, normalized URL, request body hash."""
    normalized = normalize_url(url, sort_query=True)
    body_hash = hashlib.sha256(body).hexdigest()
    return f"{method.upper()} {normalized} {body_hash}"


def entry_digest(key: str) -> str:
    return hashlib.sha256(key.encode("utf-8")).hexdigest()


_KEPT_HEADERS = ("content-type", "x-ratelimit-remaining", "link", "last-modified")


class FixtureDir:
    """On-disk store of recorded exchanges; shared by cache and replay."""

    def __init__(self, directory: Path | str) -> None:
        self.directory = Path(directory)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock_for(self, digest: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(digest, threading.Lock())

    def read(self, key: str) -> Response | None:
        digest = entry_digest(key)
        meta_path = self.directory / f"{digest}.json"
        if not meta_path.exists():
            return None
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise TransportError(f"unreadable fixture entry {meta_path}: {exc}") from exc
        if meta.get("key") != key:
            raise TransportError(
                f"fixture entry {digest} stores a different key "
                f"({meta.get('key')!r} != {key!r})"
            )
        body = (self.directory / meta["body_file"]).read_bytes()
        return Response(
            status=int(meta["status"]),
            body=body,
            headers=dict(meta.get("headers", {})),
            url=meta["url"],
            origin="cache",
        )

    def write(self, key: str, response: Response, note: str | None = None) -> None:
        digest = entry_digest(key)
        with self._lock_for(digest):
            self.directory.mkdir(parents=True, exist_ok=True)
            body_file = f"{digest}.body"
            meta = {
                "schema": FIXTURE_SCHEMA,
                "key": key,
                "method": key.split(" ", 1)[0],
                "url": response.url,
                "status": response.status,
                "headers": {
                    k: v
                    for k, v in response.headers.items()
                    if k.lower() in _KEPT_HEADERS
                },
                "body_file": body_file,
            }
            if note:
                meta["note"] = note
            tmp_body = self.directory / f"{body_file}.tmp-{os.getpid()}"
            tmp_body.write_bytes(response.body)
            os.replace(tmp_body, self.directory / body_file)
            tmp_meta = self.directory / f"{digest}.json.tmp-{os.getpid()}"
            tmp_meta.write_text(
                json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
            os.replace(tmp_meta, self.directory / f"{digest}.json")


class Transport:
    """Base transport: bookkeeping plus the mode-specific _fetch hook."""

    def __init__(self) -> None:
        self.log: list[FetchRecord] = []
        self._log_lock = threading.Lock()

    def get(self, url: str) -> Response:
        return self.request("GET", url)

    def request(self, method: str, url: str, body: bytes = b"") -> Response:
        response = self._fetch(method, url, body)
        with self._log_lock:
            self.log.append(FetchRecord(method, url, response.status, response.origin))
        return response

    def _fetch(self, method: str, url: str, body: bytes) -> Response:
        raise NotImplementedError


class ReplayTransport(Transport):
    """Serves recorded exchanges only; never touches the network."""

    def __init__(self, directory: Path | str) -> None:
        super().__init__()
        self.fixtures = FixtureDir(directory)

    def _fetch(self, method: str, url: str, body: bytes) -> Response:
        key = request_key(method, url, body)
        response = self.fixtures.read(key)
        if response is None:
            raise TransportError(f"replay miss: no recorded entry for {method} {url}")
        response.origin = "replay"
        return response


class _HostThrottle:
    """Token-interval throttle: at most rate_limit requests/minute per host."""

    def __init__(self, rate_limit: int) -> None:
        self.interval = 60.0 / max(rate_limit, 1)
        self._next_slot: dict[str, float] = {}
        self._lock = threading.Lock()

    def acquire(self, host: str) -> None:
        with self._lock:
            now = time.monotonic()
            slot = max(self._next_slot.get(host, now), now)
            self._next_slot[host] = slot + self.interval
        delay = slot - time.monotonic()
        if delay > 0:
            time.sleep(delay)


class LiveTransport(Transport):
    """Real HTTP with per-host throttling and rate-limit retries."""

    MAX_RATE_LIMIT_RETRIES = 3

    def __init__(self, policy: TransportPolicy) -> None:
        super().__init__()
        self.policy = policy
        self._throttle = _HostThrottle(policy.rate_limit)

    def _headers_for(self, host: str) -> dict[str, str]:
        headers = {"User-Agent": "patchtrace/0.1"}
        token = self.policy.auth_tokens.get(host)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        if host == "api.github.com":
            headers.setdefault("Accept", "application/vnd.github+json")
        return headers

    @staticmethod
    def _is_rate_limited(status: int, headers: Mapping[str, str]) -> bool:
        if status == 429:
            return True
        remaining = {k.lower(): v for k, v in headers.items()}.get(
            "x-ratelimit-remaining"
        )
        return status == 403 and remaining == "0"

    def _fetch(self, method: str, url: str, body: bytes) -> Response:
        import requests

        host = (urlsplit(url).hostname or "").lower()
        last_error: Exception | None = None
        for attempt in range(self.MAX_RATE_LIMIT_RETRIES + 1):
            self._throttle.acquire(host)
            try:
                raw = requests.request(
                    method,
                    url,
                    data=body or None,
                    headers=self._headers_for(host),
                    timeout=self.policy.timeout,
                )
            except requests.RequestException as exc:
                raise TransportError(f"{method} {url} failed: {exc}") from exc
            if self._is_rate_limited(raw.status_code, raw.headers):
                last_error = RateLimitedError(f"rate limited by {host}")
                time.sleep(2**attempt)
                continue
            return Response(
                status=raw.status_code,
                body=raw.content,
                headers=dict(raw.headers),
                url=url,
                origin="live",
            )
        raise last_error or RateLimitedError(f"rate limited by {host}")


class CachingTransport(Transport):
    """Read-through cache in front of another transport (live or fake)."""

    def __init__(self, directory: Path | str, inner: Transport) -> None:
        super().__init__()
        self.fixtures = FixtureDir(directory)
        self.inner = inner

    def _fetch(self, method: str, url: str, body: bytes) -> Response:
        key = request_key(method, url, body)
        cached = self.fixtures.read(key)
        if cached is not None:
            return cached
        response = self.inner._fetch(method, url, body)
        self.fixtures.write(key, response)
        return response


def open_transport(policy: TransportPolicy) -> Transport:
    if policy.mode is TransportMode.REPLAY_ONLY:
        if policy.cache_dir is None:
            raise TransportError("ReplayOnly mode requires cache_dir")
        return ReplayTransport(policy.cache_dir)
    if policy.mode is TransportMode.CACHE_THEN_LIVE:
        if policy.cache_dir is None:
            raise TransportError("CacheThenLive mode requires cache_dir")
        return CachingTransport(policy.cache_dir, LiveTransport(policy))
    return LiveTransport(policy)


def as_transport(policy_or_transport: TransportPolicy | Transport) -> Transport:
    """Accept either a policy (opened here) or an already-open transport."""
    if isinstance(policy_or_transport, Transport):
        return policy_or_transport
    return open_transport(policy_or_transport)
