// Thin client over the review service's HTTP API.

import type {
  NetworkExport,
  ReportSummary,
  ReviewDecision,
  TraceReport,
  TraceState,
} from "./types.js";

const CVE_PATTERN = /^CVE-\d{4}-\d{4,}$/;

/** Syntactic CVE id check used for client-side validation. */
export function isValidCveId(value: string): boolean {
  return CVE_PATTERN.test(value.trim().toUpperCase());
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export interface ReviewSubmission {
  patchId: string;
  verdict: "confirmed" | "rejected";
  note?: string;
  reviewer?: string;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const body = await response.text();
    let payload: unknown = {};
    if (body) {
      try {
        payload = JSON.parse(body);
      } catch {
        throw new ApiError(response.status, `non-JSON response from ${path}`);
      }
    }
    if (!response.ok) {
      const message =
        typeof payload === "object" && payload !== null && "error" in payload
          ? String((payload as { error: unknown }).error)
          : `HTTP ${response.status}`;
      throw new ApiError(response.status, message);
    }
    return payload as T;
  }

  async listReports(): Promise<ReportSummary[]> {
    const data = await this.request<{ reports: ReportSummary[] }>("/api/reports");
    return data.reports;
  }

  getReport(cveId: string): Promise<TraceReport> {
    return this.request<TraceReport>(`/api/reports/${encodeURIComponent(cveId)}`);
  }

  getNetwork(cveId: string): Promise<NetworkExport> {
    return this.request<NetworkExport>(
      `/api/reports/${encodeURIComponent(cveId)}/network`,
    );
  }

  async submitReview(
    cveId: string,
    submission: ReviewSubmission,
  ): Promise<ReviewDecision> {
    const data = await this.request<{ ok: boolean; review: ReviewDecision }>(
      `/api/reports/${encodeURIComponent(cveId)}/review`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({
          patch_id: submission.patchId,
          verdict: submission.verdict,
          note: submission.note ?? "",
          reviewer: submission.reviewer ?? "",
        }),
      },
    );
    return data.review;
  }

  requestTrace(cveId: string): Promise<TraceState> {
    return this.request<TraceState>("/api/trace", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ cve_id: cveId }),
    });
  }

  traceState(cveId: string): Promise<TraceState> {
    return this.request<TraceState>(`/api/trace/${encodeURIComponent(cveId)}`);
  }

  /** Poll a queued trace until its report is available, then fetch it. */
  async pollTrace(
    cveId: string,
    options: { intervalMs?: number; timeoutMs?: number } = {},
  ): Promise<TraceReport> {
    const interval = options.intervalMs ?? 400;
    const deadline = Date.now() + (options.timeoutMs ?? 60_000);
    for (;;) {
      const state = await this.traceState(cveId);
      if (state.state === "done") {
        return this.getReport(cveId);
      }
      if (state.state === "failed") {
        throw new ApiError(500, state.error ?? "trace failed");
      }
      if (state.state === "unknown") {
        // report may predate the queue
        try {
          return await this.getReport(cveId);
        } catch (error) {
          if (!(error instanceof ApiError) || error.status !== 404) throw error;
        }
      }
      if (Date.now() > deadline) {
        throw new ApiError(504, `trace for ${cveId} did not finish in time`);
      }
      await new Promise((resolve) => setTimeout(resolve, interval));
    }
  }
}
