import { ChangeInput, DisagreementCase, ResolutionInput } from "./api.js";
import { ClientSession } from "./session.js";

export type Choice = "promote" | "drop" | "open";

export interface BoardCase {
  data: DisagreementCase;
  choice: Choice;
  /** Optional explicit location for a promote; the server can find one
   * itself from an existing tag or a unique occurrence in the text. */
  span: { start: number; end: number } | null;
  ruleSuggestion: string;
}

/**
 * Disagreement board for the discussion phase.  Only the round lead
 * submits; cases left "open" are omitted and stay unresolved, which the
 * protocol allows.
 */
export class ResolutionBoard {
  cases: BoardCase[] = [];
  loaded = false;

  constructor(private readonly session: ClientSession) {}

  async load(): Promise<void> {
    const round = this.session.activeRound;
    if (round === null) throw new Error("no active round");
    try {
      const cases = await this.session.api.disagreements(round.id);
      this.cases = cases.map((data) => ({ data, choice: "open", span: null, ruleSuggestion: "" }));
      this.loaded = true;
    } catch (err) {
      this.session.surface(err);
    }
  }

  choose(index: number, choice: Choice): void {
    this.case(index).choice = choice;
  }

  private case(index: number): BoardCase {
    const c = this.cases[index];
    if (!c) throw new Error(`no disagreement case ${index}`);
    return c;
  }

  setSpan(index: number, start: number, end: number): void {
    this.case(index).span = { start, end };
  }

  suggestRule(index: number, text: string): void {
    this.case(index).ruleSuggestion = text;
  }

  get decided(): number {
    return this.cases.filter((c) => c.choice !== "open").length;
  }

  resolutions(): ResolutionInput[] {
    return this.cases
      .filter((c) => c.choice !== "open")
      .map((c) => ({
        section_id: c.data.section_id,
        concept: c.data.concept,
        outcome: c.choice as "promote" | "drop",
        ...(c.span ? { start: c.span.start, end: c.span.end } : {}),
        ...(c.ruleSuggestion ? { rule_suggestions: [c.ruleSuggestion] } : {}),
      }));
  }

  async submit(): Promise<boolean> {
    const round = this.session.activeRound;
    if (round === null) throw new Error("no active round");
    return this.session.mutate(() =>
      this.session.api.submitResolutions(round.id, this.resolutions(), round.version),
    );
  }
}

/**
 * Codebook-update drafting for the round lead: collect rule additions
 * and amendments, then close the round with them.  Rule suggestions
 * gathered on the board are the usual starting point.
 */
export class CloseScreen {
  readonly changes: ChangeInput[] = [];

  constructor(private readonly session: ClientSession) {}

  addRule(text: string, examples: [string, string][] = []): void {
    this.changes.push({ action: "add", text, ...(examples.length ? { examples } : {}) });
  }

  amendRule(ruleId: string, text: string): void {
    this.changes.push({ action: "amend", rule_id: ruleId, text });
  }

  removeChange(index: number): void {
    this.changes.splice(index, 1);
  }

  /** Close the round; an empty change list means the codebook held up. */
  async submit(): Promise<boolean> {
    const round = this.session.activeRound;
    if (round === null) throw new Error("no active round");
    const ok = await this.session.mutate(() =>
      this.session.api.closeRound(round.id, this.changes, round.version),
    );
    if (ok) this.changes.length = 0;
    return ok;
  }
}
