"""Reference extraction and classification.

URL references are pulled out of advisory text and web pages, classified
into patch/issue/hybrid node kinds, and filtered: commits touching only
test code or non-source files are discarded, and GitHub search results must
match the CVE's CPE vendor/product names.

The patterns below are the auditable heart of classification:

* commit id: 7-40 hex chars in a path segment following ``commit/``,
  ``commits/``, ``rev/``, ``?id=`` or ``revision=``
* svn revision: ``r<digits>`` path segment, ``rev=<digits>`` or
  ``revision=<digits>``
* issue id: ``[A-Z][A-Z0-9]+-\\d+`` anywhere, or a numeric id following
  ``/issues/``, ``/bugs/`` or ``id=`` on non-GitHub hosts
"""

from __future__ import annotations

import re
from collections import Counter
from html.parser import HTMLParser
from urllib.parse import urljoin, urlsplit

from .models import (
    CommitDetail,
    CpeEntry,
    ExtractedReference,
    IdentifierKind,
    NodeKind,
    RefVia,
    TrackingIdentifier,
)
from .urls import normalize_url

URL_PATTERN = re.compile(r"https?://[^\s<>\"'`|\\^{}\[\]]+", re.IGNORECASE)

COMMIT_ID_PATTERN = re.compile(
    r"(?:/commits?/|/rev/|[?&;]id=|[?&;]revision=)([0-9a-fA-F]{7,40})(?=[/?&#.]|$)"
)
SVN_REVISION_PATTERN = re.compile(
    r"(?:(?:^|[/=])r\d+(?=[/?&#]|$)|[?&;]rev=\d+|[?&;]revision=\d+|[?&;]pathrev=\d+)"
)

ISSUE_URL_KEYS = ("bugzilla", "jira", "issues", "bugs", "tickets", "tracker")
ISSUE_KEY_ID_PATTERN = re.compile(r"[A-Z][A-Z0-9]+-\d+")
ISSUE_NUMERIC_ID_PATTERN = re.compile(r"(?:/issues/|/bugs/|[?&;]id=)(\d+)", re.IGNORECASE)

# Seeded with the extensions of the languages the corpus is dominated by;
# callers may widen or narrow the set.
DEFAULT_SOURCE_EXTENSIONS = frozenset(
    {"java", "c", "h", "cpp", "hpp", "cc", "hh", "py", "js", "ts", "php", "rb", "go"}
)

_TRAILING_PUNCTUATION = ".,;:!?)'\""
_PATH_TOKEN_SPLIT = re.compile(r"[/._\-]+")
_NAME_TOKEN_SPLIT = re.compile(r"[\s._\-]+")


class _AnchorCollector(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.hrefs: list[str] = []

    def handle_starttag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        if tag.lower() != "a":
            return
        href = dict(attrs).get("href")
        if not href:
            return
        href = href.strip()
        if href.startswith(("#", "mailto:", "javascript:", "tel:", "data:")):
            return
        self.hrefs.append(href)


def extract_urls(
    document_text: str, base_url: str | None = None
) -> list[ExtractedReference]:
    """Extract URL references from plain text and anchor tags.

    Plain-text matches come first in scan order; anchor targets are resolved
    against ``base_url`` and appended. Results are normalized and
    deduplicated keeping the first occurrence.
    """
    seen: set[str] = set()
    refs: list[ExtractedReference] = []

    def add(raw: str, via: RefVia) -> None:
        url = normalize_url(raw)
        if not url or url in seen:
            return
        parts = urlsplit(url)
        if parts.scheme not in ("http", "https") or not parts.netloc:
            return
        seen.add(url)
        refs.append(ExtractedReference(url=url, via=via))

    for match in URL_PATTERN.finditer(document_text or ""):
        add(match.group(0).rstrip(_TRAILING_PUNCTUATION), RefVia.PLAIN_TEXT)

    collector = _AnchorCollector()
    try:
        collector.feed(document_text or "")
        collector.close()
    except Exception:
        # Malformed markup degrades to the plain-text matches already found.
        pass
    for href in collector.hrefs:
        absolute = urljoin(base_url, href) if base_url else href
        add(absolute.rstrip(_TRAILING_PUNCTUATION), RefVia.HYPERLINK)

    return refs


def classify_reference(url: str) -> NodeKind:
    """Classify a normalized URL as a patch, issue, or hybrid node.

    The patch rule wins over the issue rule when both match.
    """
    low = url.lower()
    if ("git" in low and COMMIT_ID_PATTERN.search(url)) or (
        "svn" in low and SVN_REVISION_PATTERN.search(low)
    ):
        return NodeKind.PATCH
    if "/github.com/" in low and ("/issues/" in low or "/pull/" in low):
        return NodeKind.ISSUE
    if any(key in low for key in ISSUE_URL_KEYS) and (
        ISSUE_KEY_ID_PATTERN.search(url) or ISSUE_NUMERIC_ID_PATTERN.search(url)
    ):
        return NodeKind.ISSUE
    return NodeKind.HYBRID


def _is_github_url(url: str) -> bool:
    return "/github.com/" in url.lower()


def extract_tracking_identifiers(
    urls: list[str], kinds: list[NodeKind]
) -> list[TrackingIdentifier]:
    """Harvest issue/advisory identifiers from issue and hybrid node URLs.

    Issue node URLs yield IssueIds, hybrid node URLs yield AdvisoryIds.
    Numeric-only ids are taken from non-GitHub trackers only: bare GitHub
    issue numbers are useless as search keys.
    """
    if len(urls) != len(kinds):
        raise ValueError("urls and kinds must be parallel lists")
    found: list[TrackingIdentifier] = []
    seen: set[tuple[IdentifierKind, str]] = set()

    def add(kind: IdentifierKind, text: str, origin: str) -> None:
        dedup_key = (kind, text)
        if dedup_key in seen:
            return
        seen.add(dedup_key)
        found.append(TrackingIdentifier(kind=kind, text=text, origin_url=origin))

    for url, node_kind in zip(urls, kinds):
        if node_kind is NodeKind.ISSUE:
            id_kind = IdentifierKind.ISSUE
        elif node_kind is NodeKind.HYBRID:
            id_kind = IdentifierKind.ADVISORY
        else:
            continue
        for match in ISSUE_KEY_ID_PATTERN.finditer(url):
            add(id_kind, match.group(0), url)
        if not _is_github_url(url):
            for match in ISSUE_NUMERIC_ID_PATTERN.finditer(url):
                add(id_kind, match.group(1), url)
    return found


def _is_test_path(path: str) -> bool:
    return any(
        token.lower().startswith("test")
        for token in _PATH_TOKEN_SPLIT.split(path)
        if token
    )


def _is_source_path(path: str, source_extensions: frozenset[str]) -> bool:
    name = path.rsplit("/", 1)[-1]
    if "." not in name:
        return False
    return name.rsplit(".", 1)[-1].lower() in source_extensions


def is_test_or_nonsource_only(
    detail: CommitDetail,
    source_extensions: frozenset[str] = DEFAULT_SOURCE_EXTENSIONS,
) -> bool:
    """True iff every changed path is test code or a non-source file.

    Empty change lists count as true (nothing relevant was touched).
    """
    return all(
        _is_test_path(path) or not _is_source_path(path, source_extensions)
        for path in detail.changed_paths
    )


def tokenize_name(name: str) -> list[str]:
    return [token.lower() for token in _NAME_TOKEN_SPLIT.split(name) if token]


def _names_match(left: list[str], right: list[str]) -> bool:
    # Matched token pairs m vs unmatched (|L| - m) + (|R| - m): m >= unmatched
    # simplifies to 3m >= |L| + |R|.
    matched = sum((Counter(left) & Counter(right)).values())
    return 3 * matched >= len(left) + len(right)


def cpe_name_match(owner: str, repo: str, cpes: list[CpeEntry]) -> bool:
    """True iff some CPE's vendor matches owner and product matches repo.

    Two names match when the number of matched tokens is at least the number
    of unmatched tokens, counting leftovers on both sides.
    """
    owner_tokens = tokenize_name(owner)
    repo_tokens = tokenize_name(repo)
    for cpe in cpes:
        if _names_match(owner_tokens, tokenize_name(cpe.vendor)) and _names_match(
            repo_tokens, tokenize_name(cpe.product)
        ):
            return True
    return False
