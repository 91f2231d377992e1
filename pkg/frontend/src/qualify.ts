import { QualifyResult } from "./api.js";
import { normalizeConcept } from "./offsets.js";
import { ClientSession } from "./session.js";

/**
 * Qualification test: the candidate lists the concepts they find in the
 * gold section; the server scores the list against the hidden key and
 * reports pass/fail.  The answers never reach the client.
 */
export class QualifyScreen {
  info: { gold_section_id: string; threshold: number } | null = null;
  concepts: string[] = [];
  result: QualifyResult | null = null;

  constructor(private readonly session: ClientSession) {}

  async load(): Promise<void> {
    try {
      this.info = await this.session.api.qualificationInfo();
    } catch (err) {
      this.session.surface(err);
    }
  }

  addConcept(text: string): void {
    let value: string;
    try {
      value = normalizeConcept(text).value;
    } catch {
      this.session.push("info", "A concept needs at least one word.");
      return;
    }
    if (this.concepts.includes(value)) {
      this.session.push("info", `'${value}' is already on the list.`);
      return;
    }
    this.concepts.push(value);
  }

  removeConcept(index: number): void {
    this.concepts.splice(index, 1);
  }

  async submit(): Promise<void> {
    try {
      this.result = await this.session.api.qualify(this.session.annotatorId, this.concepts);
    } catch (err) {
      this.session.surface(err);
    }
  }
}
