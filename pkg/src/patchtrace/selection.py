"""Patch selection: the confidence heuristic and the connectivity score.

A patch node's connectivity is the sum over all simple root-to-node paths
of 1 / 2^(d - 1), where d is the path's edge count reduced by one when the
path enters through the NVD or GitHub source node. Scores are exact dyadic
rationals (fractions.Fraction) so ties are never float artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .errors import UnknownNodeError
from .models import NodeKind, SourceId
from .network import ReferenceNetwork, source_node_id, source_of_node_id

# Paths entering through these sources get the one-edge length discount.
DISCOUNTED_SOURCES = frozenset({SourceId.NVD, SourceId.GITHUB})


@dataclass(frozen=True)
class PathRecord:
    node_sequence: tuple[str, ...]
    origin_source: SourceId
    raw_length: int
    effective_length: int

    @property
    def contribution(self) -> Fraction:
        return Fraction(1, 2 ** (self.effective_length - 1))

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.node_sequence),
            "origin_source": self.origin_source.value,
            "raw_length": self.raw_length,
            "effective_length": self.effective_length,
            "contribution": str(self.contribution),
        }


@dataclass
class ConnectivityScore:
    patch_node: str
    paths: tuple[PathRecord, ...]
    value: Fraction


class ConnectivityVariant(str, Enum):
    FULL = "full"
    PATH_LENGTH_ONLY = "path-length"
    PATH_NUMBER_ONLY = "path-number"


@dataclass
class SelectionConfig:
    use_confidence: bool = True
    use_connectivity: bool = True
    connectivity_variant: ConnectivityVariant = ConnectivityVariant.FULL
    top_k: int = 1  # number of top connectivity tiers to select

    def __post_init__(self) -> None:
        if not (self.use_confidence or self.use_connectivity):
            raise ValueError("at least one selection heuristic must be enabled")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if not isinstance(self.connectivity_variant, ConnectivityVariant):
            self.connectivity_variant = ConnectivityVariant(self.connectivity_variant)


def enumerate_paths(network: ReferenceNetwork, patch_node_id: str) -> list[PathRecord]:
    """All simple directed paths from the root to a patch node.

    Removed patch nodes contribute no paths and yield an empty list.
    """
    node = network.nodes.get(patch_node_id)
    if node is None:
        raise UnknownNodeError(patch_node_id)
    if node.kind is not NodeKind.PATCH:
        raise ValueError(f"{patch_node_id} is not a patch node")
    if node.removed:
        return []

    adjacency: dict[str, list[str]] = {}
    for parent, child in network.edges:
        adjacency.setdefault(parent, []).append(child)
    for children in adjacency.values():
        children.sort()

    records: list[PathRecord] = []

    def walk(current: str, trail: list[str]) -> None:
        if current == patch_node_id:
            origin = source_of_node_id(trail[1]) if len(trail) > 1 else None
            if origin is None:
                return
            raw = len(trail) - 1
            effective = raw - 1 if origin in DISCOUNTED_SOURCES else raw
            records.append(
                PathRecord(
                    node_sequence=tuple(trail),
                    origin_source=origin,
                    raw_length=raw,
                    effective_length=effective,
                )
            )
            return
        for child in adjacency.get(current, ()):
            if child in trail:
                continue
            trail.append(child)
            walk(child, trail)
            trail.pop()

    walk(network.root, [network.root])
    records.sort(key=lambda r: r.node_sequence)
    return records


def connectivity(
    network: ReferenceNetwork,
    patch_node_id: str,
    variant: ConnectivityVariant = ConnectivityVariant.FULL,
) -> ConnectivityScore:
    """Score a patch node under the full formula or one of its reductions."""
    paths = tuple(enumerate_paths(network, patch_node_id))
    if not paths:
        value = Fraction(0)
    elif variant is ConnectivityVariant.FULL:
        value = sum((p.contribution for p in paths), Fraction(0))
    elif variant is ConnectivityVariant.PATH_LENGTH_ONLY:
        shortest = min(p.effective_length for p in paths)
        value = Fraction(1, 2 ** (shortest - 1))
    else:
        value = Fraction(len(paths))
    return ConnectivityScore(patch_node=patch_node_id, paths=paths, value=value)


def high_confidence_patches(network: ReferenceNetwork) -> set[str]:
    """Non-removed patch nodes hanging directly under NVD or GitHub."""
    confident_parents = {
        source_node_id(SourceId.NVD),
        source_node_id(SourceId.GITHUB),
    }
    result = set()
    for node in network.patch_nodes():
        if node.removed or node.expanded_from:
            continue
        if confident_parents & set(network.parents(node.id)):
            result.add(node.id)
    return result


def candidate_patches(network: ReferenceNetwork) -> set[str]:
    """Non-removed, non-expanded patch nodes with at least one root path."""
    return {
        node.id
        for node in network.patch_nodes()
        if not node.removed
        and not node.expanded_from
        and enumerate_paths(network, node.id)
    }


def select_patches(network: ReferenceNetwork, config: SelectionConfig) -> set[str]:
    """Union of the confidence set and the top connectivity tier(s).

    All argmax ties are selected. An empty result means no patch was found.
    """
    candidates = candidate_patches(network)
    if not candidates:
        return set()
    selected: set[str] = set()
    if config.use_confidence:
        selected |= high_confidence_patches(network) & candidates
    if config.use_connectivity:
        scores = {
            node_id: connectivity(network, node_id, config.connectivity_variant).value
            for node_id in candidates
        }
        tiers = sorted(set(scores.values()), reverse=True)[: config.top_k]
        selected |= {node_id for node_id, value in scores.items() if value in tiers}
    return selected
