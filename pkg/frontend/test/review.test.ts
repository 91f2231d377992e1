import { describe, expect, it } from "vitest";
import { SectionView } from "../src/api.js";
import { ReviewScreen } from "../src/review.js";
import { FakeServer, makeRound, makeSession } from "./helpers.js";

const SECTIONS: SectionView[] = [
  {
    id: "tb.c01.s01",
    heading: "Weights",
    body: "Scores come from tf-idf weighting and cosine similarity measures.",
    char_count: 65,
  },
];

const CANDIDATES = [
  { section_id: "tb.c01.s01", concept: "tf-idf weighting", gram_length: 2, tagged_by: ["ben"] },
  { section_id: "tb.c01.s01", concept: "cosine similarity", gram_length: 2, tagged_by: ["ben", "cat"] },
];

function setup(candidates: unknown[] = CANDIDATES) {
  const server = new FakeServer();
  const session = makeSession(server, "ana", makeRound({ phase: "missed_review", version: 5 }));
  server.on("GET", "/rounds/r1/review/ana", { status: 200, body: candidates });
  const screen = new ReviewScreen(session, SECTIONS);
  return { server, session, screen };
}

describe("loading candidates", () => {
  it("one item per peer tag the reviewer missed", async () => {
    const { screen } = setup();
    await screen.load();
    expect(screen.items).toHaveLength(2);
    expect(screen.items[0]?.candidate.concept).toBe("tf-idf weighting");
    expect(screen.nothingMissed).toBe(false);
  });

  it("an empty list is the nothing-missed state, not an error", async () => {
    const { screen, session } = setup([]);
    await screen.load();
    expect(screen.nothingMissed).toBe(true);
    expect(session.messages).toHaveLength(0);
  });
});

describe("decisions", () => {
  it("undecided items stay out of the submission", async () => {
    const { screen } = setup();
    await screen.load();
    screen.reject(1, "too generic here");
    expect(screen.decisions()).toEqual([
      {
        section_id: "tb.c01.s01",
        concept: "cosine similarity",
        verdict: "reject",
        rationale: "too generic here",
      },
    ]);
  });

  it("switching an accept to a reject discards the located span", async () => {
    const { screen } = setup();
    await screen.load();
    screen.accept(0);
    screen.locate(0, 17, 33); // "tf-idf weighting"
    expect(screen.items[0]?.located).not.toBeNull();
    screen.reject(0);
    expect(screen.items[0]?.located).toBeNull();
    expect(screen.items[0]?.warning).toBeNull();
    expect(screen.canSubmit).toBe(true);
  });

  it("a nothing-missed reviewer submits an empty decision list", async () => {
    const { screen, server } = setup([]);
    await screen.load();
    server.on("POST", "/rounds/r1/review/ana", (body) => {
      expect(body).toEqual({ decisions: [], round_version: 5 });
      return {
        status: 200,
        body: makeRound({ phase: "missed_review", version: 6, submitted: { missed_review: ["ana"] } }),
      };
    });
    expect(await screen.submit()).toBe(true);
  });

  it("a located accept carries its span on the wire", async () => {
    const { screen, server, session } = setup();
    await screen.load();
    server.on("POST", "/rounds/r1/review/ana", (body) => {
      const payload = body as { decisions: unknown[] };
      expect(payload.decisions).toEqual([
        {
          section_id: "tb.c01.s01",
          concept: "tf-idf weighting",
          verdict: "accept",
          start: 17,
          end: 33,
        },
      ]);
      return { status: 200, body: makeRound({ phase: "missed_review", version: 6 }) };
    });
    screen.accept(0);
    screen.locate(0, 17, 33);
    expect(screen.items[0]?.warning).toBeNull();
    expect(await screen.submit()).toBe(true);
    expect(session.activeRound?.version).toBe(6);
  });
});
