"""Trace orchestration, the persistent report store, and graph export.

A trace report bundles everything one CVE run produced: the configuration
snapshot, the reference network, selected patches with their evidence
paths, expanded patches, the fetch log, and the analyst review overlay.
Reports serialize canonically so ReplayOnly reruns are byte-identical aside
from timestamps.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import EmptyNetworkError, StoreError, UnknownReportError
from .expansion import ExpandedPatch, ExpansionConfig, expand_patch
from .models import (
    ALL_SOURCES,
    IdentifierKind,
    NodeKind,
    SourceId,
    TrackingIdentifier,
    validate_cve_id,
)
from .network import BuildConfig, ReferenceNetwork, ReferenceNode, build_network
from .selection import (
    ConnectivityVariant,
    PathRecord,
    SelectionConfig,
    candidate_patches,
    connectivity,
    high_confidence_patches,
    select_patches,
)
from .transport import Transport, TransportMode, TransportPolicy, as_transport

REPORT_SCHEMA = "trace-report@1"

STATUS_FOUND = "patches-found"
STATUS_NOT_FOUND = "no-patch-found"


@dataclass
class RunConfig:
    """One knob per configurable behavior; defaults reproduce the standard run."""

    depth_limit: int = 5
    span_days: int = 30
    sources: frozenset[SourceId] = ALL_SOURCES
    flat: bool = False
    use_confidence: bool = True
    use_connectivity: bool = True
    connectivity_variant: ConnectivityVariant = ConnectivityVariant.FULL
    select_all: bool = False
    expansion: bool = True
    top_k: int = 1
    transport: TransportPolicy = field(default_factory=TransportPolicy)
    max_workers: int = 8

    def build_config(self) -> BuildConfig:
        return BuildConfig(
            depth_limit=self.depth_limit,
            enabled_sources=self.sources,
            transport=self.transport,
            flat=self.flat,
            max_workers=self.max_workers,
        )

    def selection_config(self) -> SelectionConfig:
        return SelectionConfig(
            use_confidence=self.use_confidence,
            use_connectivity=self.use_connectivity,
            connectivity_variant=self.connectivity_variant,
            top_k=self.top_k,
        )

    def expansion_config(self) -> ExpansionConfig:
        return ExpansionConfig(
            span_days=self.span_days,
            enabled=self.expansion,
            max_workers=self.max_workers,
        )

    def to_dict(self) -> dict:
        return {
            "depth_limit": self.depth_limit,
            "span_days": self.span_days,
            "sources": sorted(s.value for s in self.sources),
            "flat": self.flat,
            "use_confidence": self.use_confidence,
            "use_connectivity": self.use_connectivity,
            "connectivity_variant": self.connectivity_variant.value,
            "select_all": self.select_all,
            "expansion": self.expansion,
            "top_k": self.top_k,
            "transport_mode": self.transport.mode.value,
        }

    @classmethod
    def from_dict(cls, data: dict, transport: TransportPolicy | None = None) -> "RunConfig":
        if transport is None:
            transport = TransportPolicy(
                mode=TransportMode(data.get("transport_mode", "live"))
            )
        return cls(
            depth_limit=int(data.get("depth_limit", 5)),
            span_days=int(data.get("span_days", 30)),
            sources=frozenset(SourceId(s) for s in data.get("sources", [])) or ALL_SOURCES,
            flat=bool(data.get("flat", False)),
            use_confidence=bool(data.get("use_confidence", True)),
            use_connectivity=bool(data.get("use_connectivity", True)),
            connectivity_variant=ConnectivityVariant(
                data.get("connectivity_variant", "full")
            ),
            select_all=bool(data.get("select_all", False)),
            expansion=bool(data.get("expansion", True)),
            top_k=int(data.get("top_k", 1)),
            transport=transport,
        )


@dataclass
class SelectedPatch:
    node_id: str
    connectivity: Fraction
    confidence: bool
    paths: tuple[PathRecord, ...]

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "connectivity": str(self.connectivity),
            "connectivity_value": float(self.connectivity),
            "confidence": self.confidence,
            "paths": [p.to_dict() for p in self.paths],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SelectedPatch":
        paths = tuple(
            PathRecord(
                node_sequence=tuple(p["nodes"]),
                origin_source=SourceId(p["origin_source"]),
                raw_length=int(p["raw_length"]),
                effective_length=int(p["effective_length"]),
            )
            for p in data.get("paths", [])
        )
        return cls(
            node_id=data["node_id"],
            connectivity=Fraction(data["connectivity"]),
            confidence=bool(data.get("confidence", False)),
            paths=paths,
        )


@dataclass
class TraceReport:
    cve_id: str
    config: RunConfig
    status: str
    network: ReferenceNetwork
    selected: list[SelectedPatch]
    expanded: list[ExpandedPatch]
    fetches: list[dict]
    created_at: int = 0
    review: dict[str, dict] = field(default_factory=dict)

    def patch_ids(self) -> list[str]:
        """Selected plus expanded commit ids; the prediction set for scoring."""
        ids = [p.node_id for p in self.selected]
        ids.extend(p.commit.url for p in self.expanded)
        seen: set[str] = set()
        unique = []
        for nid in ids:
            if nid not in seen:
                seen.add(nid)
                unique.append(nid)
        return unique

    def reviewable_ids(self) -> set[str]:
        return set(self.patch_ids())

    def to_dict(self, *, volatile: bool = True) -> dict:
        data = {
            "schema": REPORT_SCHEMA,
            "cve_id": self.cve_id,
            "config": self.config.to_dict(),
            "status": self.status,
            "network": self.network.to_dict(),
            "selected": [s.to_dict() for s in self.selected],
            "expanded": [e.to_dict() for e in self.expanded],
            "provenance": {"fetches": self.fetches},
            "review": {k: dict(v) for k, v in sorted(self.review.items())},
        }
        if volatile:
            data["created_at"] = self.created_at
        return data

    def canonical_json(self) -> str:
        """Deterministic serialization excluding volatile timestamps."""
        return json.dumps(self.to_dict(volatile=False), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "TraceReport":
        report = cls(
            cve_id=data["cve_id"],
            config=RunConfig.from_dict(data.get("config", {})),
            status=data["status"],
            network=ReferenceNetwork.from_dict(data["network"]),
            selected=[SelectedPatch.from_dict(s) for s in data.get("selected", [])],
            expanded=[ExpandedPatch.from_dict(e) for e in data.get("expanded", [])],
            fetches=list(data.get("provenance", {}).get("fetches", [])),
            created_at=int(data.get("created_at", 0)),
            review=dict(data.get("review", {})),
        )
        report.validate()
        return report

    def validate(self) -> None:
        for patch in self.selected:
            if patch.node_id not in self.network.nodes:
                raise StoreError(f"selected patch {patch.node_id} missing from network")
        for patch in self.expanded:
            if patch.commit.url not in self.network.nodes:
                raise StoreError(
                    f"expanded patch {patch.commit.url} missing from network"
                )
        reviewable = self.reviewable_ids()
        for patch_id in self.review:
            if patch_id not in reviewable:
                raise StoreError(f"review decision for unknown patch {patch_id}")


def _fetch_log_slice(transport: Transport, start: int) -> list[dict]:
    # Sorted, not chronological: concurrent fetch completion order must not
    # leak into the canonical report.
    records = [r.to_dict() for r in transport.log[start:]]
    records.sort(key=lambda r: (r["method"], r["url"], r["status"], r["origin"]))
    return records


def _root_only_network(cve_id: str, depth: int) -> ReferenceNetwork:
    network = ReferenceNetwork(cve_id=cve_id, root=cve_id, depth_limit=depth)
    network.add_node(ReferenceNode(id=cve_id, kind=NodeKind.ROOT))
    return network


def trace_once(
    cve_id: str,
    config: RunConfig,
    transport: Transport | None = None,
) -> TraceReport:
    """Run build -> select -> expand for one CVE without persisting."""
    cve_id = validate_cve_id(cve_id)
    transport = transport or as_transport(config.transport)
    log_start = len(transport.log)

    try:
        network = build_network(cve_id, config.build_config(), transport)
    except EmptyNetworkError as exc:
        # Report a root-only network; source errors survive for the exit code.
        network = _root_only_network(cve_id, config.depth_limit)
        if exc.network is not None:
            network.source_errors = dict(exc.network.source_errors)
            network.notes = list(exc.network.notes)
        return TraceReport(
            cve_id=cve_id,
            config=config,
            status=STATUS_NOT_FOUND,
            network=network,
            selected=[],
            expanded=[],
            fetches=_fetch_log_slice(transport, log_start),
            created_at=int(time.time()),
        )

    if config.select_all:
        selected_ids = candidate_patches(network)
    else:
        selected_ids = select_patches(network, config.selection_config())
    confident = high_confidence_patches(network)
    selected = []
    for node_id in sorted(selected_ids):
        score = connectivity(network, node_id, ConnectivityVariant.FULL)
        selected.append(
            SelectedPatch(
                node_id=node_id,
                connectivity=score.value,
                confidence=node_id in confident,
                paths=score.paths,
            )
        )

    identifiers = [TrackingIdentifier(kind=IdentifierKind.CVE, text=cve_id)]
    identifiers.extend(network.identifiers)
    expanded: list[ExpandedPatch] = []
    expansion_config = config.expansion_config()
    if expansion_config.enabled:
        for patch in selected:
            expanded.extend(
                expand_patch(
                    network, patch.node_id, expansion_config, identifiers, transport
                )
            )
    expanded.sort(key=lambda p: (p.parent_patch, p.branch, p.commit.commit_id))

    status = STATUS_FOUND if selected or expanded else STATUS_NOT_FOUND
    return TraceReport(
        cve_id=cve_id,
        config=config,
        status=status,
        network=network,
        selected=selected,
        expanded=expanded,
        fetches=_fetch_log_slice(transport, log_start),
        created_at=int(time.time()),
    )


class ReportStore:
    """Directory of per-CVE report files plus an append-only audit log."""

    AUDIT_FILE = "audit.log"
    CONFIG_FILE = "config.json"

    def __init__(self, directory: Path | str) -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()

    def _report_path(self, cve_id: str) -> Path:
        return self.directory / f"{validate_cve_id(cve_id)}.json"

    def save(self, report: TraceReport) -> Path:
        path = self._report_path(report.cve_id)
        report.validate()
        with self._lock:
            tmp = path.with_suffix(f".tmp-{os.getpid()}")
            tmp.write_text(
                json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n",
                encoding="utf-8",
            )
            os.replace(tmp, path)
        return path

    def load(self, cve_id: str) -> TraceReport:
        path = self._report_path(cve_id)
        with self._lock:
            if not path.exists():
                raise UnknownReportError(cve_id)
            try:
                data = json.loads(path.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise StoreError(f"unreadable report {path}: {exc}") from exc
        return TraceReport.from_dict(data)

    def list_reports(self) -> list[dict]:
        summaries = []
        with self._lock:
            for path in sorted(self.directory.glob("CVE-*.json")):
                try:
                    data = json.loads(path.read_text(encoding="utf-8"))
                except (OSError, json.JSONDecodeError):
                    continue
                summaries.append(
                    {
                        "cve_id": data.get("cve_id"),
                        "status": data.get("status"),
                        "selected": len(data.get("selected", [])),
                        "expanded": len(data.get("expanded", [])),
                        "reviewed": len(data.get("review", {})),
                    }
                )
        return summaries

    def _audit_path(self) -> Path:
        return self.directory / self.AUDIT_FILE

    def audit_entries(self) -> list[dict]:
        path = self._audit_path()
        if not path.exists():
            return []
        entries = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                entries.append(json.loads(line))
        return entries

    def apply_review(
        self,
        cve_id: str,
        patch_id: str,
        verdict: str,
        note: str = "",
        reviewer: str = "",
        timestamp: float | None = None,
    ) -> dict:
        """Record a review decision; later timestamps win, everything audited."""
        if verdict not in ("confirmed", "rejected"):
            raise ValueError(f"verdict must be confirmed or rejected, got {verdict!r}")
        with self._lock:
            report = self.load(cve_id)
            if patch_id not in report.reviewable_ids():
                raise UnknownReportError(
                    f"{patch_id} is not a selected or expanded patch of {cve_id}"
                )
            entries = self.audit_entries()
            seq = len(entries) + 1
            decision = {
                "verdict": verdict,
                "note": note,
                "reviewer": reviewer,
                "timestamp": timestamp if timestamp is not None else time.time(),
                "seq": seq,
            }
            audit_entry = {
                "schema": "audit@1",
                "cve_id": cve_id,
                "patch_id": patch_id,
                **decision,
            }
            with self._audit_path().open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(audit_entry, sort_keys=True) + "\n")
            current = report.review.get(patch_id)
            if current is None or (
                (decision["timestamp"], decision["seq"])
                >= (current.get("timestamp", 0), current.get("seq", 0))
            ):
                report.review[patch_id] = decision
                self.save(report)
            return decision

    def save_run_config(self, config: RunConfig) -> None:
        path = self.directory / self.CONFIG_FILE
        payload = config.to_dict()
        payload["cache_dir"] = (
            str(config.transport.cache_dir) if config.transport.cache_dir else None
        )
        path.write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    def load_run_config(self) -> RunConfig:
        path = self.directory / self.CONFIG_FILE
        if not path.exists():
            return RunConfig()
        data = json.loads(path.read_text(encoding="utf-8"))
        transport = TransportPolicy(
            mode=TransportMode(data.get("transport_mode", "live")),
            cache_dir=data.get("cache_dir"),
        )
        return RunConfig.from_dict(data, transport=transport)


def run_trace(
    cve_id: str,
    config: RunConfig,
    store: ReportStore,
    transport: Transport | None = None,
) -> TraceReport:
    """Trace a CVE and persist the report."""
    report = trace_once(cve_id, config, transport)
    store.save(report)
    return report


_DOT_STYLE = {
    NodeKind.ROOT: {"shape": "doubleoctagon", "color": "black"},
    NodeKind.SOURCE: {"shape": "box", "color": "blue"},
    NodeKind.PATCH: {"shape": "ellipse", "color": "red"},
    NodeKind.ISSUE: {"shape": "ellipse", "color": "darkgreen"},
    NodeKind.HYBRID: {"shape": "ellipse", "color": "purple"},
}


def _dot_id(node_id: str) -> str:
    return '"' + node_id.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_graph(report: TraceReport, fmt: str = "dot") -> str:
    """Render the report's network as DOT text or as the structured export."""
    if fmt == "structured":
        return json.dumps(report.network.to_dict(), sort_keys=True, indent=2)
    if fmt != "dot":
        raise ValueError(f"unknown export format: {fmt}")
    network = report.network
    depths = network.depths()
    selected_ids = {p.node_id for p in report.selected}
    expanded_ids = {p.commit.url for p in report.expanded}
    lines = [
        "// patchtrace graph@1",
        "digraph reference_network {",
        "  rankdir=TB;",
    ]
    ordering = sorted(network.nodes, key=lambda nid: (depths.get(nid, 99), nid))
    for node_id in ordering:
        node = network.nodes[node_id]
        attrs = dict(_DOT_STYLE[node.kind])
        if node.removed:
            attrs["style"] = "dashed"
        if node_id in selected_ids:
            attrs["penwidth"] = "3"
        if node_id in expanded_ids:
            attrs["xlabel"] = '"expanded"'
        rendered = ", ".join(
            f"{key}={value}" if key in ("penwidth", "xlabel") else f'{key}="{value}"'
            for key, value in sorted(attrs.items())
        )
        lines.append(f"  {_dot_id(node_id)} [{rendered}];")
    for parent, child in sorted(network.edges):
        dashed = (
            " [style=dashed]" if network.nodes[child].removed else ""
        )
        lines.append(f"  {_dot_id(parent)} -> {_dot_id(child)}{dashed};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def parse_structured_export(text: str) -> ReferenceNetwork:
    return ReferenceNetwork.from_dict(json.loads(text))
