import { DecisionInput, ReviewCandidate, SectionView } from "./api.js";
import { extractSurface, normalizeConcept, toScalarSpan } from "./offsets.js";
import { ClientSession } from "./session.js";

export type Verdict = "accept" | "reject";

export interface ReviewItem {
  candidate: ReviewCandidate;
  verdict: Verdict | null;
  /** Scalar span the reviewer clicked for an accept; required to submit. */
  located: { start: number; end: number; surface: string } | null;
  /** Set when the located text does not normalize to the concept; the
   * server makes the binding call on submit, this is only an early hint. */
  warning: string | null;
  rationale: string;
}

/**
 * Missed-concept review: everything peers tagged that the reviewer did
 * not.  Accepting requires locating the concept in the section text;
 * rejecting takes an optional rationale.  Undecided items are simply
 * left out of the submission.
 */
export class ReviewScreen {
  items: ReviewItem[] = [];
  loaded = false;
  private readonly sections = new Map<string, SectionView>();

  constructor(
    private readonly session: ClientSession,
    sections: SectionView[],
  ) {
    for (const s of sections) this.sections.set(s.id, s);
  }

  /** True once loading found no candidates: the reviewer missed nothing. */
  get nothingMissed(): boolean {
    return this.loaded && this.items.length === 0;
  }

  async load(): Promise<void> {
    const round = this.session.activeRound;
    if (round === null) throw new Error("no active round");
    try {
      const candidates = await this.session.api.reviewCandidates(round.id, this.session.annotatorId);
      this.items = candidates.map((candidate) => ({
        candidate,
        verdict: null,
        located: null,
        warning: null,
        rationale: "",
      }));
      this.loaded = true;
    } catch (err) {
      this.session.surface(err);
    }
  }

  accept(index: number): void {
    this.item(index).verdict = "accept";
  }

  reject(index: number, rationale = ""): void {
    const item = this.item(index);
    item.verdict = "reject";
    item.rationale = rationale;
    item.located = null;
    item.warning = null;
  }

  /** Record where the reviewer clicked the concept in the section text. */
  locate(index: number, utf16Start: number, utf16End: number): void {
    const item = this.item(index);
    const body = this.sectionBody(item.candidate.section_id);
    const span = toScalarSpan(body, utf16Start, utf16End);
    const surface = extractSurface(body, span.start, span.end);
    item.located = { start: span.start, end: span.end, surface };
    let normalized: string | null = null;
    try {
      normalized = normalizeConcept(surface).value;
    } catch {
      // whitespace-only click; the warning below covers it
    }
    item.warning =
      normalized === item.candidate.concept
        ? null
        : `'${surface}' does not read as '${item.candidate.concept}'; the server will refuse this location.`;
  }

  /** Accepts without a text location keep the submit button disabled. */
  get canSubmit(): boolean {
    return this.items.every((i) => i.verdict !== "accept" || i.located !== null);
  }

  decisions(): DecisionInput[] {
    return this.items
      .filter((i) => i.verdict !== null)
      .map((i) => ({
        section_id: i.candidate.section_id,
        concept: i.candidate.concept,
        verdict: i.verdict as Verdict,
        ...(i.located ? { start: i.located.start, end: i.located.end } : {}),
        ...(i.rationale ? { rationale: i.rationale } : {}),
      }));
  }

  async submit(): Promise<boolean> {
    if (!this.canSubmit) {
      this.session.push("info", "Every accepted concept needs a text location first.");
      return false;
    }
    const round = this.session.activeRound;
    if (round === null) throw new Error("no active round");
    return this.session.mutate(() =>
      this.session.api.submitReview(round.id, this.session.annotatorId, this.decisions(), round.version),
    );
  }

  private item(index: number): ReviewItem {
    const item = this.items[index];
    if (!item) throw new Error(`no review item ${index}`);
    return item;
  }

  private sectionBody(id: string): string {
    const s = this.sections.get(id);
    if (!s) throw new Error(`section '${id}' is not part of this round`);
    return s.body;
  }
}
