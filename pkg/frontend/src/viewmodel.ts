// Graph view model: a faithful, display-ready mirror of the network export.
//
// Every node and edge of the structured export appears exactly once; the
// only client-side additions are labels, layer assignments, and the review
// overlay. Nothing here mutates graph topology.

import type { CommitDetail, TraceReport } from "./types.js";

export interface VmNode {
  id: string;
  kind: string;
  label: string;
  layer: number;
  removed: boolean;
  selected: boolean;
  expanded: boolean;
  confidence: boolean;
  connectivity: number | null;
  verdict: "confirmed" | "rejected" | null;
  detail: CommitDetail | null;
}

export interface VmEdge {
  from: string;
  to: string;
  dashed: boolean;
}

export interface GraphViewModel {
  cveId: string;
  status: string;
  nodes: VmNode[];
  edges: VmEdge[];
  layers: string[][];
  reviewable: Set<string>;
}

const SOURCE_LABELS: Record<string, string> = {
  "source:nvd": "NVD",
  "source:debian": "Debian",
  "source:redhat": "Red Hat",
  "source:github": "GitHub",
};

/** Compact display label for a node id. */
export function nodeLabel(id: string, kind: string): string {
  if (kind === "root") return id;
  if (kind === "advisory-source") return SOURCE_LABELS[id] ?? id;
  const commit = id.match(/github\.com\/[^/]+\/([^/]+)\/commit\/([0-9a-f]{7,40})/i);
  if (commit) return `${commit[1]}@${commit[2].slice(0, 6)}`;
  const issue = id.match(/github\.com\/[^/]+\/([^/]+)\/(?:issues|pull)\/(\d+)/i);
  if (issue) return `${issue[1]}#${issue[2]}`;
  const revision = id.match(/(?:rev|revision)=(\d+)/);
  if (revision && /svn/i.test(id)) return `svn r${revision[1]}`;
  try {
    const url = new URL(id);
    return url.hostname + (url.pathname.length > 1 ? "/…" : "");
  } catch {
    return id;
  }
}

/** Shortest-path depth of every node reachable from the root. */
export function layerAssignment(
  root: string,
  nodeIds: string[],
  edges: [string, string][],
): Map<string, number> {
  const children = new Map<string, string[]>();
  for (const [parent, child] of edges) {
    const list = children.get(parent);
    if (list) list.push(child);
    else children.set(parent, [child]);
  }
  const depth = new Map<string, number>([[root, 0]]);
  let frontier = [root];
  while (frontier.length > 0) {
    const next: string[] = [];
    for (const nodeId of frontier) {
      for (const child of children.get(nodeId) ?? []) {
        if (!depth.has(child)) {
          depth.set(child, (depth.get(nodeId) ?? 0) + 1);
          next.push(child);
        }
      }
    }
    frontier = next;
  }
  // Anything unreachable (should not happen) still gets rendered, one layer
  // below the deepest reachable node.
  const fallback = Math.max(0, ...depth.values()) + 1;
  for (const nodeId of nodeIds) {
    if (!depth.has(nodeId)) depth.set(nodeId, fallback);
  }
  return depth;
}

/** Build the display model for a trace report. */
export function buildViewModel(report: TraceReport): GraphViewModel {
  const network = report.network;
  const selectedIds = new Set(report.selected.map((p) => p.node_id));
  const confidenceIds = new Set(
    report.selected.filter((p) => p.confidence).map((p) => p.node_id),
  );
  const connectivityOf = new Map(
    report.selected.map((p) => [p.node_id, p.connectivity_value]),
  );
  const expandedIds = new Set(report.expanded.map((p) => p.commit_url));
  const depth = layerAssignment(
    network.root,
    network.nodes.map((n) => n.id),
    network.edges,
  );

  const nodes: VmNode[] = network.nodes.map((node) => ({
    id: node.id,
    kind: node.kind,
    label: nodeLabel(node.id, node.kind),
    layer: depth.get(node.id) ?? 0,
    removed: node.removed,
    selected: selectedIds.has(node.id),
    expanded: expandedIds.has(node.id),
    confidence: confidenceIds.has(node.id),
    connectivity: connectivityOf.get(node.id) ?? null,
    verdict: report.review[node.id]?.verdict ?? null,
    detail: network.details[node.id] ?? null,
  }));

  const removedIds = new Set(
    network.nodes.filter((n) => n.removed).map((n) => n.id),
  );
  const edges: VmEdge[] = network.edges.map(([from, to]) => ({
    from,
    to,
    dashed: removedIds.has(to),
  }));

  const maxLayer = Math.max(0, ...nodes.map((n) => n.layer));
  const layers: string[][] = Array.from({ length: maxLayer + 1 }, () => []);
  for (const node of [...nodes].sort((a, b) => a.id.localeCompare(b.id))) {
    layers[node.layer].push(node.id);
  }

  const reviewable = new Set<string>([
    ...report.selected.map((p) => p.node_id),
    ...report.expanded.map((p) => p.commit_url),
  ]);

  return {
    cveId: report.cve_id,
    status: report.status,
    nodes,
    edges,
    layers,
    reviewable,
  };
}

/** Apply a review verdict optimistically; returns the previous verdict. */
export function applyVerdict(
  vm: GraphViewModel,
  patchId: string,
  verdict: "confirmed" | "rejected" | null,
): "confirmed" | "rejected" | null {
  const node = vm.nodes.find((n) => n.id === patchId);
  if (!node) return null;
  const previous = node.verdict;
  node.verdict = verdict;
  return previous;
}

/** Client-side gate: only selected or expanded patches accept reviews. */
export function canReview(vm: GraphViewModel, nodeId: string): boolean {
  return vm.reviewable.has(nodeId);
}
