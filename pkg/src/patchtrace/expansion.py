"""Patch expansion across repository branches.

Every selected GitHub-commit patch is expanded by scanning all branches of
its repository for commits within a time window around the patch, keeping
those whose message equals/contains/is-contained-by the patch's message, or
mentions the CVE / a tracked identifier. Expanded commits become child
nodes of the selected patch.
"""

from __future__ import annotations

import concurrent.futures
import re
from dataclasses import dataclass
from enum import Enum

from . import github as github_client
from .errors import NotFoundError, ParseError, TransportError, UnknownNodeError
from .models import (
    CommitDetail,
    CommitRef,
    NodeKind,
    Platform,
    TrackingIdentifier,
    sha_equal,
)
from .network import ReferenceNetwork, ReferenceNode
from .transport import Transport, TransportPolicy, as_transport


@dataclass
class ExpansionConfig:
    span_days: int = 30
    enabled: bool = True
    max_workers: int = 8

    def __post_init__(self) -> None:
        if self.span_days < 0:
            raise ValueError("span_days must be >= 0")


class MatchKind(str, Enum):
    MESSAGE_RELATION = "message-relation"
    IDENTIFIER_MENTION = "identifier-mention"


@dataclass(frozen=True)
class ExpandedPatch:
    commit: CommitRef
    parent_patch: str
    branches: tuple[str, ...]
    matched_by: MatchKind

    @property
    def branch(self) -> str:
        return self.branches[0] if self.branches else ""

    def to_dict(self) -> dict:
        return {
            "commit_url": self.commit.url,
            "commit_id": self.commit.commit_id,
            "owner": self.commit.owner,
            "repo": self.commit.repo,
            "parent_patch": self.parent_patch,
            "branches": list(self.branches),
            "matched_by": self.matched_by.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExpandedPatch":
        return cls(
            commit=CommitRef(
                platform=Platform.GITHUB_COMMIT,
                url=data["commit_url"],
                owner=data.get("owner", ""),
                repo=data.get("repo", ""),
                commit_id=data.get("commit_id", ""),
            ),
            parent_patch=data["parent_patch"],
            branches=tuple(data.get("branches", ())),
            matched_by=MatchKind(data["matched_by"]),
        )


_CHERRY_PICK_TRAILER = re.compile(
    r"\(cherry picked from commit [0-9a-f]{7,40}\)", re.IGNORECASE
)
_WHITESPACE = re.compile(r"\s+")


def _normalize_message(message: str) -> str:
    message = _CHERRY_PICK_TRAILER.sub("", message)
    return _WHITESPACE.sub(" ", message).strip().casefold()


def messages_match(
    candidate_message: str,
    selected_message: str,
    identifiers: list[TrackingIdentifier],
) -> MatchKind | None:
    """Decide whether a candidate commit counts as a patch for the CVE.

    Empty or whitespace-only candidates never match by containment; the
    identifier check searches the raw candidate case-insensitively.
    """
    candidate = _normalize_message(candidate_message)
    selected = _normalize_message(selected_message)
    if candidate and selected and (
        candidate == selected or candidate in selected or selected in candidate
    ):
        return MatchKind.MESSAGE_RELATION
    haystack = candidate_message.casefold()
    for identifier in identifiers:
        if identifier.text and identifier.text.casefold() in haystack:
            return MatchKind.IDENTIFIER_MENTION
    return None


def expand_patch(
    network: ReferenceNetwork,
    selected_patch_id: str,
    config: ExpansionConfig,
    identifiers: list[TrackingIdentifier],
    policy: TransportPolicy | Transport,
) -> list[ExpandedPatch]:
    """Expand one selected patch across its repository's branches.

    Non-GitHub patches are skipped with a provenance note. Branch failures
    skip that branch. The selected commit itself is never returned; results
    are deduplicated by commit id with every carrying branch recorded, and
    sorted by (branch, commit id).
    """
    node = network.nodes.get(selected_patch_id)
    if node is None:
        raise UnknownNodeError(selected_patch_id)
    if not config.enabled:
        return []
    transport = as_transport(policy)
    detail = network.details.get(selected_patch_id)
    if detail is None or detail.ref.platform is not Platform.GITHUB_COMMIT:
        network.notes.append(
            f"expansion skipped: non-GitHub or unfetched patch {selected_patch_id}"
        )
        return []
    if detail.committed_at is None:
        network.notes.append(
            f"expansion skipped: no commit timestamp for {selected_patch_id}"
        )
        return []

    owner, repo = detail.ref.owner, detail.ref.repo
    try:
        branches = github_client.list_branches(owner, repo, transport)
    except (TransportError, NotFoundError, ParseError) as exc:
        network.notes.append(f"expansion skipped: branch listing failed: {exc}")
        return []

    def scan(branch: str) -> tuple[str, list[CommitDetail] | Exception]:
        try:
            return branch, github_client.list_commits_in_window(
                owner, repo, branch, detail.committed_at, config.span_days, transport
            )
        except (TransportError, NotFoundError, ParseError) as exc:
            return branch, exc

    if config.max_workers > 1 and len(branches) > 1:
        with concurrent.futures.ThreadPoolExecutor(
            max_workers=config.max_workers
        ) as pool:
            scans = dict(pool.map(scan, branches))
    else:
        scans = dict(scan(branch) for branch in branches)

    # commit id -> (ref, branches, match kind, detail)
    matched: dict[str, tuple[CommitRef, set[str], MatchKind, CommitDetail]] = {}
    for branch in sorted(scans):
        outcome = scans[branch]
        if isinstance(outcome, Exception):
            network.notes.append(
                f"expansion: branch {branch} of {owner}/{repo} failed: {outcome}"
            )
            continue
        for candidate in outcome:
            if sha_equal(candidate.ref.commit_id, detail.ref.commit_id):
                continue
            kind = messages_match(candidate.message, detail.message, identifiers)
            if kind is None:
                continue
            entry = matched.get(candidate.ref.commit_id)
            if entry is None:
                matched[candidate.ref.commit_id] = (
                    candidate.ref,
                    {branch},
                    kind,
                    candidate,
                )
            else:
                entry[1].add(branch)

    expanded: list[ExpandedPatch] = []
    for commit_id in sorted(matched):
        ref, branch_set, kind, candidate = matched[commit_id]
        patch = ExpandedPatch(
            commit=ref,
            parent_patch=selected_patch_id,
            branches=tuple(sorted(branch_set)),
            matched_by=kind,
        )
        network.add_node(
            ReferenceNode(
                id=ref.url, kind=NodeKind.PATCH, expanded_from=selected_patch_id
            )
        )
        if not network.add_edge(selected_patch_id, ref.url) and (
            selected_patch_id,
            ref.url,
        ) not in network.edges:
            # The edge would close a cycle (mutually expanding patches);
            # acyclicity wins and the expansion is dropped with a note.
            network.notes.append(
                f"expansion: dropped {ref.url} under {selected_patch_id} (cycle)"
            )
            continue
        network.details.setdefault(ref.url, candidate)
        expanded.append(patch)
    expanded.sort(key=lambda p: (p.branch, p.commit.commit_id))
    return expanded
