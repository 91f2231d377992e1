import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import {
  extractSurface,
  normalizeConcept,
  scalarLength,
  scalarToUtf16,
  snapToCharBoundary,
  toScalarSpan,
  utf16ToScalar,
} from "../src/offsets.js";

interface FixtureCase {
  name: string;
  surface: string;
  concept: string;
  gram_length: number;
  scalar_start: number;
  scalar_end: number;
  utf16_start: number;
  utf16_end: number;
}

interface Fixture {
  text: string;
  scalar_length: number;
  utf16_length: number;
  cases: FixtureCase[];
}

// Same file the server's test suite pins extract_surface against; both
// sides must read the same surfaces from the same offsets.
const fixture: Fixture = JSON.parse(
  readFileSync(new URL("../../tests/fixtures/span_fidelity.json", import.meta.url), "utf8"),
);

describe("span fidelity against the shared fixture", () => {
  it("measures the text in both offset families", () => {
    expect(scalarLength(fixture.text)).toBe(fixture.scalar_length);
    expect(fixture.text.length).toBe(fixture.utf16_length);
  });

  for (const c of fixture.cases) {
    it(`maps offsets both ways: ${c.name}`, () => {
      expect(utf16ToScalar(fixture.text, c.utf16_start)).toBe(c.scalar_start);
      expect(utf16ToScalar(fixture.text, c.utf16_end)).toBe(c.scalar_end);
      expect(scalarToUtf16(fixture.text, c.scalar_start)).toBe(c.utf16_start);
      expect(scalarToUtf16(fixture.text, c.scalar_end)).toBe(c.utf16_end);
    });

    it(`reads the server's surface at scalar offsets: ${c.name}`, () => {
      expect(extractSurface(fixture.text, c.scalar_start, c.scalar_end)).toBe(c.surface);
      const concept = normalizeConcept(c.surface);
      expect(concept.value).toBe(c.concept);
      expect(concept.gramLength).toBe(c.gram_length);
    });

    it(`round-trips a DOM selection into the same span: ${c.name}`, () => {
      expect(toScalarSpan(fixture.text, c.utf16_start, c.utf16_end)).toEqual({
        start: c.scalar_start,
        end: c.scalar_end,
      });
    });
  }

  it("round-trips every scalar offset in the text", () => {
    for (let scalar = 0; scalar <= fixture.scalar_length; scalar++) {
      expect(utf16ToScalar(fixture.text, scalarToUtf16(fixture.text, scalar))).toBe(scalar);
    }
  });
});

describe("surrogate pair handling", () => {
  const emojiAt = fixture.text.indexOf("\u{1F4A1}");

  it("fixture text really contains an astral character", () => {
    expect(emojiAt).toBeGreaterThan(-1);
  });

  it("an offset between the surrogate halves has no scalar equivalent", () => {
    expect(() => utf16ToScalar(fixture.text, emojiAt + 1)).toThrow(/splits a surrogate pair/);
  });

  it("selection edges snap outward to whole characters", () => {
    expect(snapToCharBoundary(fixture.text, emojiAt + 1, "start")).toBe(emojiAt);
    expect(snapToCharBoundary(fixture.text, emojiAt + 1, "end")).toBe(emojiAt + 2);
    // already on a boundary: untouched, no drift toward word edges
    expect(snapToCharBoundary(fixture.text, emojiAt, "start")).toBe(emojiAt);
    expect(snapToCharBoundary(fixture.text, emojiAt + 2, "end")).toBe(emojiAt + 2);
  });

  it("a selection dragged through half the emoji still covers it whole", () => {
    const span = toScalarSpan(fixture.text, emojiAt + 1, emojiAt + 1 + 6);
    const surface = extractSurface(fixture.text, span.start, span.end);
    expect(surface.startsWith("\u{1F4A1}")).toBe(true);
  });

  it("reversed selections normalize", () => {
    const forward = toScalarSpan(fixture.text, 10, 26);
    const backward = toScalarSpan(fixture.text, 26, 10);
    expect(backward).toEqual(forward);
  });
});

describe("concept normalization mirror", () => {
  it("collapses case and internal whitespace", () => {
    expect(normalizeConcept("  Inverted \t Index ").value).toBe("inverted index");
  });

  it("counts grams by spaces, hyphens do not split", () => {
    expect(normalizeConcept("tf-idf weighting").gramLength).toBe(2);
    expect(normalizeConcept("b+ tree").gramLength).toBe(2);
  });

  it("applies NFC before casing", () => {
    // decomposed i + combining diaeresis must equal the precomposed form
    expect(normalizeConcept("naïve bayes").value).toBe(normalizeConcept("naïve bayes").value);
  });

  it("rejects whitespace-only surfaces", () => {
    expect(() => normalizeConcept("   \t ")).toThrow();
  });
});
