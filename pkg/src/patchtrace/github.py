"""GitHub REST client (search, commits, branches, commit windows) plus a
minimal viewvc-layout parser for SVN revision pages.

Pagination is handled internally; commit search is capped at 1,000 results,
mirroring the API's hard limit.
"""

from __future__ import annotations

import re
from datetime import datetime, timezone
from html.parser import HTMLParser

from .errors import NotFoundError, ParseError, UnsupportedPlatformError
from .models import CommitDetail, CommitRef, Platform
from .transport import Transport, TransportPolicy, as_transport
from .urls import github_commit_url, with_query

GITHUB_API = "https://api.github.com"
SEARCH_RESULT_CAP = 1000
_PAGE_SIZE = 100


def search_commits_url(query: str, page: int) -> str:
    return with_query(
        f"{GITHUB_API}/search/commits",
        {"q": query, "per_page": _PAGE_SIZE, "page": page},
    )


def commit_url(owner: str, repo: str, sha: str) -> str:
    return f"{GITHUB_API}/repos/{owner}/{repo}/commits/{sha}"


def branches_url(owner: str, repo: str, page: int) -> str:
    return with_query(
        f"{GITHUB_API}/repos/{owner}/{repo}/branches",
        {"per_page": _PAGE_SIZE, "page": page},
    )


def commits_window_url(
    owner: str, repo: str, branch: str, since: str, until: str, page: int
) -> str:
    return with_query(
        f"{GITHUB_API}/repos/{owner}/{repo}/commits",
        {
            "sha": branch,
            "since": since,
            "until": until,
            "per_page": _PAGE_SIZE,
            "page": page,
        },
    )


def parse_iso_timestamp(value: str) -> int:
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return int(datetime.fromisoformat(text).timestamp())


def format_iso_timestamp(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def search_github_commits(
    query: str, policy: TransportPolicy | Transport
) -> list[tuple[CommitRef, str]]:
    """Search GitHub commits for ``query``; at most 1,000 results.

    Each result is a (CommitRef, commit message) pair with owner, repo, and
    commit id populated.
    """
    if not query:
        raise ValueError("search query must be non-empty")
    transport = as_transport(policy)
    results: list[tuple[CommitRef, str]] = []
    page = 1
    while len(results) < SEARCH_RESULT_CAP:
        response = transport.get(search_commits_url(query, page))
        if response.status != 200:
            raise ParseError(
                f"GitHub commit search returned HTTP {response.status} for {query!r}"
            )
        payload = response.json()
        try:
            items = list(payload.get("items", []))
        except AttributeError as exc:
            raise ParseError(f"malformed commit search response for {query!r}") from exc
        for item in items:
            try:
                owner = item["repository"]["owner"]["login"]
                repo = item["repository"]["name"]
                sha = str(item["sha"])
                message = item["commit"]["message"]
            except (KeyError, TypeError) as exc:
                raise ParseError(f"malformed commit search item: {exc}") from exc
            ref = CommitRef(
                platform=Platform.GITHUB_COMMIT,
                url=github_commit_url(owner, repo, sha),
                owner=owner,
                repo=repo,
                commit_id=sha.lower(),
            )
            results.append((ref, message))
            if len(results) >= SEARCH_RESULT_CAP:
                break
        if len(items) < _PAGE_SIZE:
            break
        page += 1
    return results


def _fetch_github_commit(ref: CommitRef, transport: Transport) -> CommitDetail:
    response = transport.get(commit_url(ref.owner, ref.repo, ref.commit_id))
    if response.status == 404:
        raise NotFoundError(f"commit not found: {ref.url}")
    if response.status != 200:
        raise ParseError(f"commit fetch returned HTTP {response.status}: {ref.url}")
    payload = response.json()
    try:
        message = payload["commit"]["message"]
        committed_at = parse_iso_timestamp(payload["commit"]["committer"]["date"])
        paths = tuple(
            f["filename"] for f in payload.get("files", []) if f.get("filename")
        )
        sha = str(payload.get("sha", ref.commit_id)).lower()
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ParseError(f"malformed commit payload for {ref.url}: {exc}") from exc
    resolved = CommitRef(
        platform=Platform.GITHUB_COMMIT,
        url=github_commit_url(ref.owner, ref.repo, sha),
        owner=ref.owner,
        repo=ref.repo,
        commit_id=sha,
    )
    return CommitDetail(
        ref=resolved,
        message=message,
        changed_paths=paths,
        committed_at=committed_at,
    )


class _ViewvcParser(HTMLParser):
    """Pulls the log message and changed paths out of a viewvc revision page.

    The log message is the first <pre> block; changed paths are the texts of
    anchors whose href carries a pathrev= parameter.
    """

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.message_parts: list[str] = []
        self.paths: list[str] = []
        self._in_pre = False
        self._pre_done = False
        self._capture_path = False

    def handle_starttag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        if tag == "pre" and not self._pre_done:
            self._in_pre = True
        elif tag == "a":
            href = dict(attrs).get("href") or ""
            self._capture_path = "pathrev=" in href

    def handle_endtag(self, tag: str) -> None:
        if tag == "pre" and self._in_pre:
            self._in_pre = False
            self._pre_done = True
        elif tag == "a":
            self._capture_path = False

    def handle_data(self, data: str) -> None:
        if self._in_pre:
            self.message_parts.append(data)
        elif self._capture_path:
            text = data.strip()
            if text:
                self.paths.append(text)


def _fetch_svn_commit(ref: CommitRef, transport: Transport) -> CommitDetail:
    response = transport.get(ref.url)
    if response.status == 404:
        raise NotFoundError(f"SVN revision not found: {ref.url}")
    if response.status != 200:
        raise ParseError(f"SVN revision fetch returned HTTP {response.status}")
    parser = _ViewvcParser()
    parser.feed(response.text)
    parser.close()
    return CommitDetail(
        ref=ref,
        message="".join(parser.message_parts).strip(),
        changed_paths=tuple(parser.paths),
        committed_at=None,
    )


def fetch_commit(ref: CommitRef, policy: TransportPolicy | Transport) -> CommitDetail:
    """Fetch a commit's message and changed paths."""
    transport = as_transport(policy)
    if ref.platform is Platform.GITHUB_COMMIT:
        if not ref.owner or not ref.repo:
            raise ValueError(f"GitHub commit ref missing owner/repo: {ref.url}")
        return _fetch_github_commit(ref, transport)
    if ref.platform is Platform.SVN_COMMIT:
        return _fetch_svn_commit(ref, transport)
    raise UnsupportedPlatformError(f"no adapter for commits at {ref.url}")


def list_branches(
    owner: str, repo: str, policy: TransportPolicy | Transport
) -> list[str]:
    """List all branch names of a repository, sorted lexicographically."""
    if not owner or not repo:
        raise ValueError("owner and repo must be non-empty")
    transport = as_transport(policy)
    names: list[str] = []
    page = 1
    while True:
        response = transport.get(branches_url(owner, repo, page))
        if response.status == 404:
            raise NotFoundError(f"repository not found: {owner}/{repo}")
        if response.status != 200:
            raise ParseError(f"branch listing returned HTTP {response.status}")
        payload = response.json()
        try:
            names.extend(branch["name"] for branch in payload)
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed branch listing for {owner}/{repo}") from exc
        if len(payload) < _PAGE_SIZE:
            break
        page += 1
    return sorted(names)


def list_commits_in_window(
    owner: str,
    repo: str,
    branch: str,
    center: int,
    span_days: int,
    policy: TransportPolicy | Transport,
) -> list[CommitDetail]:
    """List a branch's commits committed within +-span_days of ``center``.

    Boundaries are inclusive; results are sorted by commit time ascending.
    """
    if span_days < 0:
        raise ValueError("span_days must be >= 0")
    transport = as_transport(policy)
    low = center - span_days * 86400
    high = center + span_days * 86400
    since = format_iso_timestamp(low)
    until = format_iso_timestamp(high)
    details: list[CommitDetail] = []
    page = 1
    while True:
        response = transport.get(
            commits_window_url(owner, repo, branch, since, until, page)
        )
        if response.status == 404:
            raise NotFoundError(f"branch not found: {owner}/{repo}@{branch}")
        if response.status != 200:
            raise ParseError(f"commit window listing returned HTTP {response.status}")
        payload = response.json()
        for item in payload:
            try:
                sha = item["sha"].lower()
                message = item["commit"]["message"]
                committed_at = parse_iso_timestamp(item["commit"]["committer"]["date"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"malformed commit listing item: {exc}") from exc
            if not (low <= committed_at <= high):
                continue
            ref = CommitRef(
                platform=Platform.GITHUB_COMMIT,
                url=github_commit_url(owner, repo, sha),
                owner=owner,
                repo=repo,
                commit_id=sha,
            )
            details.append(
                CommitDetail(
                    ref=ref,
                    message=message,
                    changed_paths=(),
                    committed_at=committed_at,
                    branch_hint=branch,
                )
            )
        if len(payload) < _PAGE_SIZE:
            break
        page += 1
    details.sort(key=lambda d: (d.committed_at, d.ref.commit_id))
    return details


_SVN_HINT = re.compile(r"svn", re.IGNORECASE)


def commit_ref_from_url(url: str) -> CommitRef:
    """Build a CommitRef from a normalized patch-node URL."""
    from .urls import parse_github_commit_url

    github = parse_github_commit_url(url)
    if github:
        owner, repo, sha = github
        return CommitRef(
            platform=Platform.GITHUB_COMMIT,
            url=github_commit_url(owner, repo, sha),
            owner=owner,
            repo=repo,
            commit_id=sha,
        )
    if _SVN_HINT.search(url):
        revision = ""
        match = re.search(r"(?:rev|revision|pathrev)=(\d+)", url) or re.search(
            r"/r(\d+)(?:[/?#]|$)", url
        )
        if match:
            revision = f"r{match.group(1)}"
        return CommitRef(platform=Platform.SVN_COMMIT, url=url, commit_id=revision)
    match = re.search(r"([0-9a-f]{7,40})", url, re.IGNORECASE)
    return CommitRef(
        platform=Platform.OTHER_GIT_COMMIT,
        url=url,
        commit_id=(match.group(1).lower() if match else ""),
    )
