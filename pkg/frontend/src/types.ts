// Shapes of the JSON documents served by the trace API.

export interface NetworkNode {
  id: string;
  kind: "root" | "advisory-source" | "patch" | "issue" | "hybrid";
  source_flags: string[];
  removed: boolean;
  fetch_status: string;
  expanded_from: string | null;
}

export interface CommitDetail {
  platform: string;
  url: string;
  owner: string;
  repo: string;
  commit_id: string;
  message: string;
  changed_paths: string[];
  committed_at: number | null;
  branch_hint: string | null;
}

export interface NetworkExport {
  schema: string;
  cve_id: string;
  root: string;
  depth_limit: number;
  nodes: NetworkNode[];
  edges: [string, string][];
  details: Record<string, CommitDetail>;
  identifiers: { kind: string; text: string; origin_url: string }[];
  source_errors: Record<string, string>;
  notes: string[];
}

export interface EvidencePath {
  nodes: string[];
  origin_source: string;
  raw_length: number;
  effective_length: number;
  contribution: string;
}

export interface SelectedPatch {
  node_id: string;
  connectivity: string;
  connectivity_value: number;
  confidence: boolean;
  paths: EvidencePath[];
}

export interface ExpandedPatch {
  commit_url: string;
  commit_id: string;
  owner: string;
  repo: string;
  parent_patch: string;
  branches: string[];
  matched_by: string;
}

export interface ReviewDecision {
  verdict: "confirmed" | "rejected";
  note: string;
  reviewer: string;
  timestamp: number;
  seq: number;
}

export interface TraceReport {
  schema: string;
  cve_id: string;
  config: Record<string, unknown>;
  status: "patches-found" | "no-patch-found";
  network: NetworkExport;
  selected: SelectedPatch[];
  expanded: ExpandedPatch[];
  provenance: { fetches: { method: string; url: string; status: number; origin: string }[] };
  review: Record<string, ReviewDecision>;
  created_at?: number;
}

export interface ReportSummary {
  cve_id: string;
  status: string;
  selected: number;
  expanded: number;
  reviewed: number;
}

export interface TraceState {
  cve_id: string;
  state: "queued" | "running" | "done" | "failed" | "unknown";
  error?: string;
}
