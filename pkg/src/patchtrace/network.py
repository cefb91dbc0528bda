"""Layered reference network construction.

The network is a DAG rooted at the CVE. Layer 1 holds one advisory-source
node per source that tracks the CVE; layer 2 holds the classified advisory
references; deeper layers come from iteratively fetching issue and hybrid
pages up to a depth limit. A final augment step attaches GitHub commit
search hits under a GitHub source node.

Construction is schedule-invariant: page fetches within a layer may run
concurrently, but results are merged in sorted node-id order, so the final
node and edge sets never depend on fetch completion order.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field

from . import github as github_client
from .advisories import (
    fetch_debian_advisory,
    fetch_nvd_advisory,
    fetch_redhat_advisory,
    parse_cpe_entries,
)
from .errors import (
    EmptyNetworkError,
    NotFoundError,
    ParseError,
    TransportError,
    UnknownNodeError,
    UnsupportedPlatformError,
)
from .extraction import (
    DEFAULT_SOURCE_EXTENSIONS,
    classify_reference,
    extract_tracking_identifiers,
    extract_urls,
    cpe_name_match,
    is_test_or_nonsource_only,
)
from .models import (
    ADVISORY_SOURCES,
    ALL_SOURCES,
    CommitDetail,
    CpeEntry,
    FetchStatus,
    NodeKind,
    SourceId,
    TrackingIdentifier,
    validate_cve_id,
)
from .transport import Transport, TransportPolicy, as_transport
from .urls import parse_github_repo_url

NETWORK_SCHEMA = "network@1"

_ADVISORY_FIELD_FOR_SOURCE = {
    SourceId.NVD: "references",
    SourceId.DEBIAN: "Notes",
    SourceId.REDHAT: "comments",
}


def source_node_id(source: SourceId) -> str:
    return f"source:{source.value}"


_SOURCE_IDS = {source_node_id(s): s for s in SourceId}


def source_of_node_id(node_id: str) -> SourceId | None:
    return _SOURCE_IDS.get(node_id)


@dataclass
class ReferenceNode:
    id: str
    kind: NodeKind
    source_flags: set[SourceId] = field(default_factory=set)
    removed: bool = False
    fetch_status: FetchStatus = FetchStatus.FETCHED
    expanded_from: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "source_flags": sorted(s.value for s in self.source_flags),
            "removed": self.removed,
            "fetch_status": self.fetch_status.value,
            "expanded_from": self.expanded_from,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReferenceNode":
        return cls(
            id=data["id"],
            kind=NodeKind(data["kind"]),
            source_flags={SourceId(s) for s in data.get("source_flags", [])},
            removed=bool(data.get("removed", False)),
            fetch_status=FetchStatus(data.get("fetch_status", "fetched")),
            expanded_from=data.get("expanded_from"),
        )


@dataclass
class ReferenceNetwork:
    cve_id: str
    root: str
    depth_limit: int
    nodes: dict[str, ReferenceNode] = field(default_factory=dict)
    edges: set[tuple[str, str]] = field(default_factory=set)
    details: dict[str, CommitDetail] = field(default_factory=dict)
    identifiers: tuple[TrackingIdentifier, ...] = ()
    source_errors: dict[SourceId, str] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def children(self, node_id: str) -> list[str]:
        return sorted(child for parent, child in self.edges if parent == node_id)

    def parents(self, node_id: str) -> list[str]:
        return sorted(parent for parent, child in self.edges if child == node_id)

    def reachable_from(self, node_id: str) -> set[str]:
        seen = {node_id}
        stack = [node_id]
        while stack:
            for child in self.children(stack.pop()):
                if child not in seen:
                    seen.add(child)
                    stack.append(child)
        return seen

    def depths(self) -> dict[str, int]:
        """Shortest-path depth from the root for every reachable node."""
        depths = {self.root: 0}
        frontier = [self.root]
        while frontier:
            next_frontier = []
            for node_id in frontier:
                for child in self.children(node_id):
                    if child not in depths:
                        depths[child] = depths[node_id] + 1
                        next_frontier.append(child)
            frontier = next_frontier
        return depths

    def would_cycle(self, parent: str, child: str) -> bool:
        return parent == child or parent in self.reachable_from(child)

    def add_node(self, node: ReferenceNode) -> bool:
        """Insert the node if new; returns True when it was added."""
        if node.id in self.nodes:
            return False
        self.nodes[node.id] = node
        return True

    def add_edge(self, parent: str, child: str) -> bool:
        """Insert an edge, refusing edges that would create a cycle."""
        if (parent, child) in self.edges:
            return False
        if self.would_cycle(parent, child):
            self.notes.append(f"cycle-guard: skipped edge {parent} -> {child}")
            return False
        self.edges.add((parent, child))
        return True

    def patch_nodes(self) -> list[ReferenceNode]:
        return sorted(
            (n for n in self.nodes.values() if n.kind is NodeKind.PATCH),
            key=lambda n: n.id,
        )

    def reference_node_count(self) -> int:
        return sum(
            1
            for n in self.nodes.values()
            if n.kind in (NodeKind.PATCH, NodeKind.ISSUE, NodeKind.HYBRID)
        )

    def to_dict(self) -> dict:
        return {
            "schema": NETWORK_SCHEMA,
            "cve_id": self.cve_id,
            "root": self.root,
            "depth_limit": self.depth_limit,
            "nodes": [self.nodes[k].to_dict() for k in sorted(self.nodes)],
            "edges": [list(e) for e in sorted(self.edges)],
            "details": {k: self.details[k].to_dict() for k in sorted(self.details)},
            "identifiers": [
                {"kind": i.kind.value, "text": i.text, "origin_url": i.origin_url}
                for i in self.identifiers
            ],
            "source_errors": {
                s.value: msg for s, msg in sorted(self.source_errors.items())
            },
            "notes": sorted(self.notes),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReferenceNetwork":
        from .models import IdentifierKind

        net = cls(
            cve_id=data["cve_id"],
            root=data["root"],
            depth_limit=int(data["depth_limit"]),
        )
        for node_data in data.get("nodes", []):
            net.nodes[node_data["id"]] = ReferenceNode.from_dict(node_data)
        net.edges = {tuple(e) for e in data.get("edges", [])}
        net.details = {
            k: CommitDetail.from_dict(v) for k, v in data.get("details", {}).items()
        }
        net.identifiers = tuple(
            TrackingIdentifier(
                kind=IdentifierKind(i["kind"]),
                text=i["text"],
                origin_url=i.get("origin_url", ""),
            )
            for i in data.get("identifiers", [])
        )
        net.source_errors = {
            SourceId(s): msg for s, msg in data.get("source_errors", {}).items()
        }
        net.notes = list(data.get("notes", []))
        return net


@dataclass
class BuildConfig:
    depth_limit: int = 5
    enabled_sources: frozenset[SourceId] = ALL_SOURCES
    transport: TransportPolicy = field(default_factory=TransportPolicy)
    flat: bool = False
    max_workers: int = 8
    source_extensions: frozenset[str] = DEFAULT_SOURCE_EXTENSIONS

    def __post_init__(self) -> None:
        if self.depth_limit < 2:
            raise ValueError("depth_limit must be >= 2 (root, sources, references)")
        self.enabled_sources = frozenset(
            SourceId(s) if not isinstance(s, SourceId) else s
            for s in self.enabled_sources
        )


_ADVISORY_FETCHERS = {
    SourceId.NVD: fetch_nvd_advisory,
    SourceId.DEBIAN: fetch_debian_advisory,
    SourceId.REDHAT: fetch_redhat_advisory,
}


def _is_github_issue_node(node_id: str) -> bool:
    low = node_id.lower()
    return "/github.com/" in low and ("/issues/" in low or "/pull/" in low)


def _fetch_commit_detail(
    network: ReferenceNetwork,
    node_id: str,
    transport: Transport,
) -> tuple[CommitDetail | None, FetchStatus]:
    if node_id in network.details:
        return network.details[node_id], FetchStatus.FETCHED
    ref = github_client.commit_ref_from_url(node_id)
    try:
        return github_client.fetch_commit(ref, transport), FetchStatus.FETCHED
    except UnsupportedPlatformError:
        return None, FetchStatus.SKIPPED
    except (TransportError, NotFoundError, ParseError, ValueError):
        return None, FetchStatus.FAILED


def _prune_patch_node(
    network: ReferenceNetwork,
    node_id: str,
    config: BuildConfig,
    transport: Transport,
) -> None:
    node = network.nodes[node_id]
    detail, status = _fetch_commit_detail(network, node_id, transport)
    node.fetch_status = status
    if detail is None:
        return
    network.details.setdefault(node_id, detail)
    if is_test_or_nonsource_only(detail, config.source_extensions):
        node.removed = True


def _attach_references(
    network: ReferenceNetwork,
    parent_id: str,
    refs: list,
) -> list[str]:
    """Classify extracted references and attach them under ``parent_id``.

    Hybrid references are dropped past the advisory layer; references from a
    GitHub issue page must point into the same repository.
    """
    added: list[str] = []
    parent_repo = (
        parse_github_repo_url(parent_id) if _is_github_issue_node(parent_id) else None
    )
    for ref in refs:
        kind = classify_reference(ref.url)
        if kind is NodeKind.HYBRID:
            continue
        if parent_repo is not None:
            child_repo = parse_github_repo_url(ref.url)
            if child_repo != parent_repo:
                network.notes.append(
                    f"cross-repo: dropped {ref.url} referenced by {parent_id}"
                )
                continue
        is_new = network.add_node(ReferenceNode(id=ref.url, kind=kind))
        network.add_edge(parent_id, ref.url)
        if is_new:
            added.append(ref.url)
    return added


def expand_node(
    network: ReferenceNetwork,
    node_id: str,
    config: BuildConfig,
    transport: Transport | None = None,
) -> list[str]:
    """Expand one node: prune-check a patch, or crawl an issue/hybrid page.

    Returns the ids of newly added child nodes. Fetch failures mark the node
    Failed and leave it as a leaf.
    """
    if node_id not in network.nodes:
        raise UnknownNodeError(node_id)
    transport = transport or as_transport(config.transport)
    node = network.nodes[node_id]
    if node.kind is NodeKind.PATCH:
        _prune_patch_node(network, node_id, config, transport)
        return []
    if node.kind not in (NodeKind.ISSUE, NodeKind.HYBRID):
        return []
    depth = network.depths().get(node_id)
    if depth is None or depth >= config.depth_limit:
        node.fetch_status = FetchStatus.SKIPPED
        return []
    try:
        response = transport.get(node_id)
        if response.status != 200:
            raise TransportError(f"HTTP {response.status}")
        refs = extract_urls(response.text, base_url=node_id)
    except (TransportError, ParseError):
        node.fetch_status = FetchStatus.FAILED
        return []
    node.fetch_status = FetchStatus.FETCHED
    return _attach_references(network, node_id, refs)


def _advisory_analysis(
    network: ReferenceNetwork,
    cve_id: str,
    config: BuildConfig,
    transport: Transport,
) -> list[CpeEntry]:
    docs = {}
    for source in ADVISORY_SOURCES:
        if source not in config.enabled_sources:
            continue
        try:
            doc = _ADVISORY_FETCHERS[source](cve_id, transport)
        except NotFoundError:
            doc = None
        except (TransportError, ParseError) as exc:
            network.source_errors[source] = str(exc)
            continue
        if doc is not None:
            docs[source] = doc

    cpes: list[CpeEntry] = []
    if SourceId.NVD in docs:
        cpes = parse_cpe_entries(docs[SourceId.NVD])

    for source in ADVISORY_SOURCES:
        doc = docs.get(source)
        if doc is None:
            continue
        sid = source_node_id(source)
        network.add_node(ReferenceNode(id=sid, kind=NodeKind.SOURCE))
        network.add_edge(network.root, sid)
        text = doc.raw_fields.get(_ADVISORY_FIELD_FOR_SOURCE[source], "")
        for ref in extract_urls(text):
            kind = classify_reference(ref.url)
            network.add_node(ReferenceNode(id=ref.url, kind=kind))
            network.add_edge(sid, ref.url)
    return cpes


def _reference_analysis(
    network: ReferenceNetwork,
    config: BuildConfig,
    transport: Transport,
) -> None:
    """Iterate breadth-first over the reference layers, merging in sorted order."""
    frontier = sorted(
        node_id
        for node_id, node in network.nodes.items()
        if node.kind in (NodeKind.PATCH, NodeKind.ISSUE, NodeKind.HYBRID)
    )
    depth = 2
    while frontier:
        payloads: dict[str, object] = {}

        def fetch_one(node_id: str):
            node = network.nodes[node_id]
            if node.kind is NodeKind.PATCH:
                return _fetch_commit_detail(network, node_id, transport)
            if depth >= config.depth_limit:
                return None
            try:
                response = transport.get(node_id)
                if response.status != 200:
                    raise TransportError(f"HTTP {response.status}")
                return extract_urls(response.text, base_url=node_id)
            except (TransportError, ParseError):
                return TransportError(node_id)

        if config.max_workers > 1 and len(frontier) > 1:
            with concurrent.futures.ThreadPoolExecutor(
                max_workers=config.max_workers
            ) as pool:
                futures = {nid: pool.submit(fetch_one, nid) for nid in frontier}
                payloads = {nid: fut.result() for nid, fut in futures.items()}
        else:
            payloads = {nid: fetch_one(nid) for nid in frontier}

        next_frontier: list[str] = []
        for node_id in sorted(payloads):
            payload = payloads[node_id]
            node = network.nodes[node_id]
            if node.kind is NodeKind.PATCH:
                detail, status = payload
                node.fetch_status = status
                if detail is not None:
                    network.details.setdefault(node_id, detail)
                    if is_test_or_nonsource_only(detail, config.source_extensions):
                        node.removed = True
                continue
            if payload is None:
                node.fetch_status = FetchStatus.SKIPPED
                continue
            if isinstance(payload, TransportError):
                node.fetch_status = FetchStatus.FAILED
                continue
            next_frontier.extend(_attach_references(network, node_id, payload))
        frontier = sorted(set(next_frontier))
        depth += 1


def _harvest_identifiers(network: ReferenceNetwork) -> tuple[TrackingIdentifier, ...]:
    node_ids = sorted(
        node_id
        for node_id, node in network.nodes.items()
        if node.kind in (NodeKind.ISSUE, NodeKind.HYBRID)
    )
    kinds = [network.nodes[node_id].kind for node_id in node_ids]
    return tuple(extract_tracking_identifiers(node_ids, kinds))


def augment_from_github(
    network: ReferenceNetwork,
    cve_id: str,
    identifiers: list[TrackingIdentifier],
    cpes: list[CpeEntry],
    config: BuildConfig,
    transport: Transport | None = None,
) -> list[str]:
    """Search GitHub commits for the CVE id and harvested identifiers.

    Hits that match the CPE vendor/product and change non-test source files
    become children of the GitHub advisory-source node. Best-effort: search
    failures are noted per key and skipped.
    """
    if SourceId.GITHUB not in config.enabled_sources:
        return []
    transport = transport or as_transport(config.transport)
    keys = [cve_id]
    for text in sorted({identifier.text for identifier in identifiers}):
        if text not in keys:
            keys.append(text)

    added: list[str] = []
    github_sid = source_node_id(SourceId.GITHUB)
    for key in keys:
        try:
            results = github_client.search_github_commits(key, transport)
        except (TransportError, ParseError) as exc:
            network.notes.append(f"github-search: key {key!r} failed: {exc}")
            continue
        for ref, _message in sorted(results, key=lambda pair: pair[0].url):
            if not cpe_name_match(ref.owner, ref.repo, cpes):
                continue
            detail, status = _fetch_commit_detail(network, ref.url, transport)
            if detail is None:
                network.notes.append(
                    f"github-search: commit {ref.url} not fetchable ({status.value})"
                )
                continue
            if is_test_or_nonsource_only(detail, config.source_extensions):
                continue
            if github_sid not in network.nodes:
                network.add_node(ReferenceNode(id=github_sid, kind=NodeKind.SOURCE))
                network.add_edge(network.root, github_sid)
            is_new = network.add_node(ReferenceNode(id=ref.url, kind=NodeKind.PATCH))
            network.add_edge(github_sid, ref.url)
            network.details.setdefault(ref.url, detail)
            if is_new:
                added.append(ref.url)
    return added


def _finalize_source_flags(network: ReferenceNetwork) -> None:
    for source in SourceId:
        sid = source_node_id(source)
        if sid not in network.nodes:
            continue
        for node_id in network.reachable_from(sid):
            if node_id in network.nodes and node_id != sid:
                network.nodes[node_id].source_flags.add(source)


def build_network(
    cve_id: str,
    config: BuildConfig,
    transport: Transport | None = None,
) -> ReferenceNetwork:
    """Build the full reference network for a CVE.

    Raises EmptyNetworkError (carrying the partial network) when no source
    yields any reference.
    """
    cve_id = validate_cve_id(cve_id)
    transport = transport or as_transport(config.transport)
    network = ReferenceNetwork(
        cve_id=cve_id, root=cve_id, depth_limit=config.depth_limit
    )
    network.add_node(ReferenceNode(id=cve_id, kind=NodeKind.ROOT))

    cpes = _advisory_analysis(network, cve_id, config, transport)
    if not config.flat:
        _reference_analysis(network, config, transport)
    network.identifiers = _harvest_identifiers(network)
    augment_from_github(
        network, cve_id, list(network.identifiers), cpes, config, transport
    )
    _finalize_source_flags(network)

    if network.reference_node_count() == 0:
        raise EmptyNetworkError(cve_id, network)
    return network
