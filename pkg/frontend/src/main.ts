// Application wiring: report list, trace requests, graph view, reviews.

import { ApiClient, ApiError, isValidCveId } from "./api.js";
import { renderDetailPanel, renderNetwork } from "./render.js";
import {
  applyVerdict,
  buildViewModel,
  canReview,
  type GraphViewModel,
  type VmNode,
} from "./viewmodel.js";
import type { TraceReport } from "./types.js";

const api = new ApiClient("");

interface AppState {
  report: TraceReport | null;
  vm: GraphViewModel | null;
  activeNode: VmNode | null;
}

const state: AppState = { report: null, vm: null, activeNode: null };

function element<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

function setBanner(text: string, isError = false): void {
  const banner = element<HTMLDivElement>("banner");
  banner.textContent = text;
  banner.className = isError ? "banner banner-error" : "banner";
  banner.hidden = text === "";
}

async function refreshReportList(): Promise<void> {
  const list = element<HTMLUListElement>("report-list");
  list.textContent = "";
  try {
    const reports = await api.listReports();
    for (const summary of reports) {
      const item = document.createElement("li");
      const link = document.createElement("a");
      link.href = `#${summary.cve_id}`;
      link.textContent = `${summary.cve_id} — ${summary.status}`
        + (summary.reviewed ? ` (${summary.reviewed} reviewed)` : "");
      link.addEventListener("click", (event) => {
        event.preventDefault();
        void openReport(summary.cve_id);
      });
      item.appendChild(link);
      list.appendChild(item);
    }
    if (reports.length === 0) {
      const item = document.createElement("li");
      item.textContent = "no reports yet — request a trace above";
      list.appendChild(item);
    }
  } catch (error) {
    setBanner(`failed to list reports: ${describe(error)}`, true);
  }
}

function describe(error: unknown): string {
  return error instanceof Error ? error.message : String(error);
}

function redraw(): void {
  if (!state.vm || !state.report) return;
  const counts = renderNetwork(element("graph"), state.vm, {
    onNodeClick: (node) => {
      state.activeNode = node;
      drawDetail(node);
    },
  });
  element<HTMLSpanElement>("graph-stats").textContent =
    `${counts.nodeCount} nodes, ${counts.edgeCount} edges`;
}

function drawDetail(node: VmNode): void {
  if (!state.report || !state.vm) return;
  const panel = element<HTMLDivElement>("detail");
  renderDetailPanel(panel, node, state.report);
  if (canReview(state.vm, node.id)) {
    const controls = document.createElement("div");
    controls.className = "review-controls";
    for (const verdict of ["confirmed", "rejected"] as const) {
      const button = document.createElement("button");
      button.textContent = verdict === "confirmed" ? "confirm" : "reject";
      button.addEventListener("click", () => void submitReview(node, verdict));
      controls.appendChild(button);
    }
    panel.appendChild(controls);
  }
}

async function submitReview(
  node: VmNode,
  verdict: "confirmed" | "rejected",
): Promise<void> {
  if (!state.vm || !state.report) return;
  if (!canReview(state.vm, node.id)) {
    setBanner("only selected or expanded patches can be reviewed", true);
    return;
  }
  const previous = applyVerdict(state.vm, node.id, verdict);
  redraw();
  try {
    const decision = await api.submitReview(state.report.cve_id, {
      patchId: node.id,
      verdict,
    });
    state.report.review[node.id] = decision;
    setBanner(`recorded ${verdict} for ${node.label}`);
  } catch (error) {
    applyVerdict(state.vm, node.id, previous);
    redraw();
    setBanner(`review failed, rolled back: ${describe(error)}`, true);
    return;
  }
  drawDetail(node);
}

async function openReport(cveId: string): Promise<void> {
  setBanner("");
  try {
    const report = await api.getReport(cveId);
    state.report = report;
    state.vm = buildViewModel(report);
    state.activeNode = null;
    element<HTMLHeadingElement>("report-title").textContent =
      `${report.cve_id} — ${report.status}`;
    element<HTMLDivElement>("detail").textContent =
      report.status === "no-patch-found"
        ? "No patch was found for this CVE. The network below contains only the root."
        : "Click a node to inspect it.";
    redraw();
  } catch (error) {
    setBanner(`could not open report: ${describe(error)}`, true);
  }
}

async function requestTrace(): Promise<void> {
  const input = element<HTMLInputElement>("cve-input");
  const cveId = input.value.trim().toUpperCase();
  if (!isValidCveId(cveId)) {
    setBanner(`"${input.value}" is not a CVE identifier`, true);
    return;
  }
  try {
    const existing = await api.getReport(cveId).catch((error) => {
      if (error instanceof ApiError && error.status === 404) return null;
      throw error;
    });
    if (existing) {
      state.report = existing;
      state.vm = buildViewModel(existing);
      element<HTMLHeadingElement>("report-title").textContent =
        `${existing.cve_id} — ${existing.status}`;
      redraw();
      return;
    }
    setBanner(`tracing ${cveId}…`);
    await api.requestTrace(cveId);
    const report = await api.pollTrace(cveId);
    state.report = report;
    state.vm = buildViewModel(report);
    setBanner("");
    element<HTMLHeadingElement>("report-title").textContent =
      `${report.cve_id} — ${report.status}`;
    redraw();
    await refreshReportList();
  } catch (error) {
    setBanner(`trace failed: ${describe(error)}`, true);
  }
}

export function bootstrap(): void {
  element<HTMLButtonElement>("trace-button").addEventListener("click", () => {
    void requestTrace();
  });
  element<HTMLInputElement>("cve-input").addEventListener("keydown", (event) => {
    if ((event as KeyboardEvent).key === "Enter") void requestTrace();
  });
  void refreshReportList();
}

bootstrap();
