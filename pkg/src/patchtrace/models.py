"""Shared domain types: advisory sources, documents, commits, identifiers."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .errors import InvalidCveId


class SourceId(str, Enum):
    NVD = "nvd"
    DEBIAN = "debian"
    REDHAT = "redhat"
    GITHUB = "github"


ALL_SOURCES = frozenset(SourceId)

# Advisory sources crawled directly for advisories; GitHub joins during augment.
ADVISORY_SOURCES = (SourceId.NVD, SourceId.DEBIAN, SourceId.REDHAT)


class NodeKind(str, Enum):
    ROOT = "root"
    SOURCE = "advisory-source"
    PATCH = "patch"
    ISSUE = "issue"
    HYBRID = "hybrid"


class FetchStatus(str, Enum):
    FETCHED = "fetched"
    FAILED = "failed"
    SKIPPED = "skipped"


class Platform(str, Enum):
    GITHUB_COMMIT = "github"
    SVN_COMMIT = "svn"
    OTHER_GIT_COMMIT = "other-git"


class RefVia(str, Enum):
    PLAIN_TEXT = "plain-text"
    HYPERLINK = "hyperlink"
    ADVISORY_FIELD = "advisory-field"


class IdentifierKind(str, Enum):
    CVE = "cve"
    ISSUE = "issue"
    ADVISORY = "advisory"


CVE_ID_PATTERN = re.compile(r"^CVE-\d{4}-\d{4,}$")


def validate_cve_id(cve_id: str) -> str:
    """Uppercase and validate a CVE identifier, raising InvalidCveId otherwise."""
    candidate = cve_id.strip().upper()
    if not CVE_ID_PATTERN.match(candidate):
        raise InvalidCveId(f"not a CVE identifier: {cve_id!r}")
    return candidate


def cve_year(cve_id: str) -> int:
    return int(validate_cve_id(cve_id).split("-")[1])


@dataclass(frozen=True)
class CpeEntry:
    """Vendor/product pair from a CPE name (lowercase tokens)."""

    vendor: str
    product: str


@dataclass(frozen=True)
class CommitRef:
    platform: Platform
    url: str
    owner: str = ""
    repo: str = ""
    commit_id: str = ""


@dataclass(frozen=True)
class CommitDetail:
    ref: CommitRef
    message: str
    changed_paths: tuple[str, ...]
    committed_at: int | None = None
    branch_hint: str | None = None

    def to_dict(self) -> dict:
        return {
            "platform": self.ref.platform.value,
            "url": self.ref.url,
            "owner": self.ref.owner,
            "repo": self.ref.repo,
            "commit_id": self.ref.commit_id,
            "message": self.message,
            "changed_paths": list(self.changed_paths),
            "committed_at": self.committed_at,
            "branch_hint": self.branch_hint,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CommitDetail":
        ref = CommitRef(
            platform=Platform(data["platform"]),
            url=data["url"],
            owner=data.get("owner", ""),
            repo=data.get("repo", ""),
            commit_id=data.get("commit_id", ""),
        )
        return cls(
            ref=ref,
            message=data.get("message", ""),
            changed_paths=tuple(data.get("changed_paths", ())),
            committed_at=data.get("committed_at"),
            branch_hint=data.get("branch_hint"),
        )


@dataclass(frozen=True)
class AdvisoryDocument:
    """One advisory as fetched from a source, with its named text sections."""

    source: SourceId
    cve_id: str
    raw_fields: Mapping[str, str]
    fetched_at: int


@dataclass(frozen=True)
class TrackingIdentifier:
    kind: IdentifierKind
    text: str
    origin_url: str = ""


@dataclass(frozen=True)
class ExtractedReference:
    url: str
    via: RefVia
    kind: NodeKind | None = None


def sha_equal(a: str, b: str) -> bool:
    """Commit-id equality tolerant of abbreviated hex hashes (>= 7 chars)."""
    a = a.lower()
    b = b.lower()
    if a == b:
        return True
    if len(a) >= 7 and len(b) >= 7:
        return a.startswith(b) or b.startswith(a)
    return False
