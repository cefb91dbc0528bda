import test from "node:test";
import assert from "node:assert/strict";

import { ApiClient, ApiError, isValidCveId } from "../src/api.js";

interface Recorded {
  url: string;
  init?: RequestInit;
}

function stubFetch(
  routes: Record<string, { status: number; body: unknown }[]>,
  recorded: Recorded[] = [],
): typeof fetch {
  const remaining = new Map(Object.entries(routes).map(([k, v]) => [k, [...v]]));
  return (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    recorded.push({ url, init });
    const queue = remaining.get(url);
    const next = queue?.shift();
    if (!next) {
      return new Response(JSON.stringify({ error: "no stub" }), { status: 404 });
    }
    return new Response(JSON.stringify(next.body), { status: next.status });
  }) as typeof fetch;
}

test("isValidCveId accepts real ids and rejects malformed ones", () => {
  assert.ok(isValidCveId("CVE-2017-11428"));
  assert.ok(isValidCveId("cve-2020-11001"));
  assert.ok(!isValidCveId("CVE-17-1"));
  assert.ok(!isValidCveId("GHSA-abcd"));
  assert.ok(!isValidCveId(""));
});

test("submitReview posts the wire format and unwraps the decision", async () => {
  const recorded: Recorded[] = [];
  const client = new ApiClient(
    "http://unit",
    stubFetch(
      {
        "http://unit/api/reports/CVE-2017-11428/review": [
          {
            status: 200,
            body: {
              ok: true,
              review: {
                verdict: "confirmed",
                note: "",
                reviewer: "ana",
                timestamp: 1,
                seq: 1,
              },
            },
          },
        ],
      },
      recorded,
    ),
  );
  const decision = await client.submitReview("CVE-2017-11428", {
    patchId: "https://github.com/o/r/commit/abc1234",
    verdict: "confirmed",
    reviewer: "ana",
  });
  assert.equal(decision.verdict, "confirmed");
  const payload = JSON.parse(String(recorded[0].init?.body));
  assert.deepEqual(payload, {
    patch_id: "https://github.com/o/r/commit/abc1234",
    verdict: "confirmed",
    note: "",
    reviewer: "ana",
  });
});

test("API errors surface status and message", async () => {
  const client = new ApiClient(
    "http://unit",
    stubFetch({
      "http://unit/api/reports/CVE-2099-4444": [
        { status: 404, body: { error: "report not found" } },
      ],
    }),
  );
  await assert.rejects(
    () => client.getReport("CVE-2099-4444"),
    (error: unknown) => {
      assert.ok(error instanceof ApiError);
      assert.equal(error.status, 404);
      assert.match(error.message, /report not found/);
      return true;
    },
  );
});

test("pollTrace waits through queued and running states", async () => {
  const report = {
    schema: "trace-report@1",
    cve_id: "CVE-2020-11001",
    config: {},
    status: "patches-found",
    network: {
      schema: "network@1",
      cve_id: "CVE-2020-11001",
      root: "CVE-2020-11001",
      depth_limit: 5,
      nodes: [],
      edges: [],
      details: {},
      identifiers: [],
      source_errors: {},
      notes: [],
    },
    selected: [],
    expanded: [],
    provenance: { fetches: [] },
    review: {},
  };
  const client = new ApiClient(
    "http://unit",
    stubFetch({
      "http://unit/api/trace/CVE-2020-11001": [
        { status: 200, body: { cve_id: "CVE-2020-11001", state: "queued" } },
        { status: 200, body: { cve_id: "CVE-2020-11001", state: "running" } },
        { status: 200, body: { cve_id: "CVE-2020-11001", state: "done" } },
      ],
      "http://unit/api/reports/CVE-2020-11001": [{ status: 200, body: report }],
    }),
  );
  const result = await client.pollTrace("CVE-2020-11001", { intervalMs: 1 });
  assert.equal(result.status, "patches-found");
});

test("pollTrace surfaces failed traces as errors", async () => {
  const client = new ApiClient(
    "http://unit",
    stubFetch({
      "http://unit/api/trace/CVE-2020-11002": [
        {
          status: 200,
          body: { cve_id: "CVE-2020-11002", state: "failed", error: "boom" },
        },
      ],
    }),
  );
  await assert.rejects(() => client.pollTrace("CVE-2020-11002"), /boom/);
});
