import { AnnotationSpanInput, SectionView } from "./api.js";
import { normalizeConcept, extractSurface, toScalarSpan } from "./offsets.js";
import { ClientSession } from "./session.js";

export interface PendingTag {
  sectionId: string;
  start: number;
  end: number;
  surface: string;
  concept: string;
  gramLength: number;
}

/**
 * Annotation screen: select text, collect concept tags, submit the batch.
 * Peer annotations are deliberately absent here; they become visible in
 * the review screen once the round reaches missed review.
 */
export class AnnotateScreen {
  readonly tags: PendingTag[] = [];
  private readonly sections = new Map<string, SectionView>();

  constructor(
    private readonly session: ClientSession,
    sections: SectionView[],
  ) {
    for (const s of sections) this.sections.set(s.id, s);
  }

  section(id: string): SectionView {
    const s = this.sections.get(id);
    if (!s) throw new Error(`section '${id}' is not part of this round`);
    return s;
  }

  /**
   * Turn a DOM selection into a pending tag.  Edges snap to whole
   * characters (never to word boundaries); the span's exact surface is
   * kept for highlighting and its normalized form becomes the concept
   * chip.  Returns the tag, or null with a visible message when the
   * selection cannot be used.
   */
  addSelection(sectionId: string, utf16Start: number, utf16End: number): PendingTag | null {
    const body = this.section(sectionId).body;
    const span = toScalarSpan(body, utf16Start, utf16End);
    if (span.start === span.end) {
      this.session.push("info", "Nothing selected.");
      return null;
    }
    const surface = extractSurface(body, span.start, span.end);
    let concept;
    try {
      concept = normalizeConcept(surface);
    } catch {
      this.session.push("info", "Selection is only whitespace; pick the concept's text.");
      return null;
    }
    const duplicate = this.tags.some(
      (t) => t.sectionId === sectionId && t.concept === concept.value && t.start === span.start && t.end === span.end,
    );
    if (duplicate) {
      this.session.push("info", `'${concept.value}' is already tagged at this spot.`);
      return null;
    }
    const tag: PendingTag = {
      sectionId,
      start: span.start,
      end: span.end,
      surface,
      concept: concept.value,
      gramLength: concept.gramLength,
    };
    this.tags.push(tag);
    return tag;
  }

  removeTag(index: number): void {
    this.tags.splice(index, 1);
  }

  /** Concept chips for one section, in tagging order. */
  chips(sectionId: string): PendingTag[] {
    return this.tags.filter((t) => t.sectionId === sectionId);
  }

  /** Submit the batch; an empty batch is a legal "nothing here" claim. */
  async submit(): Promise<boolean> {
    const round = this.session.activeRound;
    if (round === null) throw new Error("no active round");
    const annotations: AnnotationSpanInput[] = this.tags.map((t) => ({
      section_id: t.sectionId,
      start: t.start,
      end: t.end,
    }));
    const ok = await this.session.mutate(() =>
      this.session.api.submitAnnotations(round.id, annotations, round.version),
    );
    if (ok) this.tags.length = 0;
    return ok;
  }
}
