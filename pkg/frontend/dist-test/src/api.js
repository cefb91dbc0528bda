// Thin client over the review service's HTTP API.
const CVE_PATTERN = /^CVE-\d{4}-\d{4,}$/;
/** Syntactic CVE id check used for client-side validation. */
export function isValidCveId(value) {
    return CVE_PATTERN.test(value.trim().toUpperCase());
}
export class ApiError extends Error {
    status;
    constructor(status, message) {
        super(message);
        this.status = status;
    }
}
export class ApiClient {
    baseUrl;
    fetchImpl;
    constructor(baseUrl, fetchImpl = fetch) {
        this.baseUrl = baseUrl;
        this.fetchImpl = fetchImpl;
    }
    async request(path, init) {
        const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
        const body = await response.text();
        let payload = {};
        if (body) {
            try {
                payload = JSON.parse(body);
            }
            catch {
                throw new ApiError(response.status, `non-JSON response from ${path}`);
            }
        }
        if (!response.ok) {
            const message = typeof payload === "object" && payload !== null && "error" in payload
                ? String(payload.error)
                : `HTTP ${response.status}`;
            throw new ApiError(response.status, message);
        }
        return payload;
    }
    async listReports() {
        const data = await this.request("/api/reports");
        return data.reports;
    }
    getReport(cveId) {
        return this.request(`/api/reports/${encodeURIComponent(cveId)}`);
    }
    getNetwork(cveId) {
        return this.request(`/api/reports/${encodeURIComponent(cveId)}/network`);
    }
    async submitReview(cveId, submission) {
        const data = await this.request(`/api/reports/${encodeURIComponent(cveId)}/review`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({
                patch_id: submission.patchId,
                verdict: submission.verdict,
                note: submission.note ?? "",
                reviewer: submission.reviewer ?? "",
            }),
        });
        return data.review;
    }
    requestTrace(cveId) {
        return this.request("/api/trace", {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({ cve_id: cveId }),
        });
    }
    traceState(cveId) {
        return this.request(`/api/trace/${encodeURIComponent(cveId)}`);
    }
    /** Poll a queued trace until its report is available, then fetch it. */
    async pollTrace(cveId, options = {}) {
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
                }
                catch (error) {
                    if (!(error instanceof ApiError) || error.status !== 404)
                        throw error;
                }
            }
            if (Date.now() > deadline) {
                throw new ApiError(504, `trace for ${cveId} did not finish in time`);
            }
            await new Promise((resolve) => setTimeout(resolve, interval));
        }
    }
}
