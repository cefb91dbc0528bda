"""URL normalization and commit-URL parsing.

Normalized URLs double as node identities in the reference network, so the
rules here decide when two references collapse into one node.
"""

from __future__ import annotations

import re
from typing import Mapping
from urllib.parse import parse_qsl, urlencode, urlsplit, urlunsplit

_DUP_SLASH = re.compile(r"/{2,}")
_TRACKING_KEYS = {"fbclid", "gclid", "igshid", "mc_cid", "mc_eid", "ref_src"}
_TRACKING_PREFIXES = ("utm_",)

# github.com/<owner>/<repo>/commit(s)/<hex>[.diff|.patch|/...]
_GITHUB_COMMIT_PATH = re.compile(
    r"^/([^/]+)/([^/]+)/commits?/([0-9a-fA-F]{7,40})(?:[/.].*)?$"
)

_DEFAULT_PORTS = {"http": 80, "https": 443}


def _clean_query(query: str, sort: bool) -> str:
    pairs = []
    for key, value in parse_qsl(query, keep_blank_values=True):
        low = key.lower()
        if low in _TRACKING_KEYS or low.startswith(_TRACKING_PREFIXES):
            continue
        pairs.append((key, value))
    if sort:
        pairs.sort()
    return urlencode(pairs)


def normalize_url(url: str, *, sort_query: bool = False) -> str:
    """Return the canonical form of ``url``.

    Lowercases scheme and host, strips fragments and tracking parameters,
    collapses duplicate slashes, drops default ports, and rewrites GitHub
    commit URLs to the ``https://github.com/owner/repo/commit/<id>`` shape.
    Idempotent: normalizing a normalized URL is a no-op.
    """
    url = url.strip()
    parts = urlsplit(url)
    scheme = parts.scheme.lower()
    host = (parts.hostname or "").lower()
    if host == "www.github.com":
        host = "github.com"
    netloc = host
    if parts.port and parts.port != _DEFAULT_PORTS.get(scheme):
        netloc = f"{host}:{parts.port}"
    path = _DUP_SLASH.sub("/", parts.path)

    if host == "github.com":
        match = _GITHUB_COMMIT_PATH.match(path)
        if match:
            owner, repo, sha = match.groups()
            path = f"/{owner}/{repo}/commit/{sha.lower()}"
            return urlunsplit((scheme, netloc, path, "", ""))

    query = _clean_query(parts.query, sort_query)
    return urlunsplit((scheme, netloc, path, query, ""))


def with_query(url: str, params: Mapping[str, object]) -> str:
    """Append ``params`` to ``url`` with a deterministic (sorted) encoding."""
    if not params:
        return url
    encoded = urlencode(sorted((k, str(v)) for k, v in params.items()))
    joiner = "&" if "?" in url else "?"
    return f"{url}{joiner}{encoded}"


def github_commit_url(owner: str, repo: str, sha: str) -> str:
    return f"https://github.com/{owner}/{repo}/commit/{sha.lower()}"


def parse_github_commit_url(url: str) -> tuple[str, str, str] | None:
    """Return (owner, repo, commit id) for a GitHub commit URL, else None."""
    parts = urlsplit(url)
    host = (parts.hostname or "").lower()
    if host not in ("github.com", "www.github.com"):
        return None
    match = _GITHUB_COMMIT_PATH.match(_DUP_SLASH.sub("/", parts.path))
    if not match:
        return None
    owner, repo, sha = match.groups()
    return owner, repo, sha.lower()


def parse_github_repo_url(url: str) -> tuple[str, str] | None:
    """Return (owner, repo) for any github.com URL with at least two path segments."""
    parts = urlsplit(url)
    host = (parts.hostname or "").lower()
    if host not in ("github.com", "www.github.com"):
        return None
    segments = [s for s in parts.path.split("/") if s]
    if len(segments) < 2:
        return None
    return segments[0], segments[1]
