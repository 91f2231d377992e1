import { describe, expect, it } from "vitest";
import { ApiClient } from "../src/api.js";
import { agreementRow, loadDashboard, rowSummary } from "../src/dashboard.js";
import { errorBody, FakeServer, makeRound } from "./helpers.js";

function client(server: FakeServer): ApiClient {
  return new ApiClient("", "adm", server.fetch);
}

function report(phase: string, mean: number, fcf: number) {
  return {
    scope: "r1",
    phase_label: phase,
    partition: {},
    pairwise: { "ana|ben": mean },
    mean_pairwise: mean,
    full_consensus_fraction: fcf,
  };
}

describe("agreement rows", () => {
  it("carries both phases for a closed round", async () => {
    const server = new FakeServer();
    server.on("GET", "/rounds/r1/agreement?phase=before_discussion", {
      status: 200,
      body: report("before_discussion", 0.667, 0.5),
    });
    server.on("GET", "/rounds/r1/agreement?phase=after_discussion", {
      status: 200,
      body: report("after_discussion", 1.0, 1.0),
    });
    const row = await agreementRow(client(server), makeRound({ phase: "closed" }));
    expect(row.before?.mean).toBeCloseTo(0.667);
    expect(row.after?.fullConsensus).toBe(1.0);
    expect(row.pending).toBeNull();
    expect(rowSummary(row)).toBe("r1 before 0.67 / after 1.00");
  });

  it("keeps the server's explanation while a round is still collecting", async () => {
    const server = new FakeServer();
    const reason = "round 'r1' is missing the annotating submission of 'cat'";
    server.on("GET", "/rounds/r1/agreement?phase=before_discussion", {
      status: 409,
      body: errorBody("IncompleteDataError", reason),
    });
    const row = await agreementRow(client(server), makeRound());
    expect(row.before).toBeNull();
    expect(row.pending).toBe(reason);
    expect(rowSummary(row)).toContain(reason);
  });
});

describe("dashboard load", () => {
  it("collects rounds, codebook, convergence, and the stats table", async () => {
    const server = new FakeServer();
    server.on("GET", "/rounds", { status: 200, body: [makeRound({ phase: "closed" })] });
    server.on("GET", "/rounds/r1/agreement?phase=before_discussion", {
      status: 200,
      body: report("before_discussion", 0.8, 0.6),
    });
    server.on("GET", "/rounds/r1/agreement?phase=after_discussion", {
      status: 200,
      body: report("after_discussion", 1.0, 1.0),
    });
    server.on("GET", "/codebook", {
      status: 200,
      body: { rules: [{ id: "r01", text: "Tag full names.", examples: [], round_introduced: 1, amendments: [] }] },
    });
    server.on("GET", "/codebook/convergence", {
      status: 200,
      body: { additions: [[1, 1]], converged_at: null },
    });
    server.on("GET", "/stats/table", {
      status: 200,
      body: {
        occurrences_before: {
          buckets: { "1": { count: 3, percent: "100.00%" } },
          total: 3,
          oversized: 0,
        },
      },
    });

    const data = await loadDashboard(client(server));

    expect(data.rows).toHaveLength(1);
    expect(data.rules[0]?.id).toBe("r01");
    expect(data.convergence?.converged_at).toBeNull();
    expect(data.stats?.["occurrences_before"]?.total).toBe(3);
    expect(data.convergenceNote).toBeNull();
    expect(data.statsNote).toBeNull();
  });

  it("before any closed round, refusals become notes instead of failures", async () => {
    const server = new FakeServer();
    server.on("GET", "/rounds", { status: 200, body: [] });
    server.on("GET", "/codebook", { status: 200, body: { rules: [] } });
    server.on("GET", "/codebook/convergence", {
      status: 404,
      body: errorBody("EmptyRangeError", "no closed rounds yet"),
    });
    server.on("GET", "/stats/table", {
      status: 404,
      body: errorBody("EmptyRangeError", "no closed rounds in range"),
    });

    const data = await loadDashboard(client(server));

    expect(data.rows).toHaveLength(0);
    expect(data.convergence).toBeNull();
    expect(data.convergenceNote).toBe("no closed rounds yet");
    expect(data.statsNote).toBe("no closed rounds in range");
  });
});
