import { ApiClient, ApiError, OfflineError, RoundView } from "./api.js";

/**
 * What the annotator should be doing right now.  Always derived from the
 * server's round phase plus whether this annotator already submitted;
 * the client never advances a phase on its own.
 */
export type ViewState =
  | "idle"
  | "annotate"
  | "review"
  | "resolve"
  | "close"
  | "waiting"
  | "dashboard";

export interface UserMessage {
  kind: "error" | "stale" | "offline" | "info";
  text: string;
}

export class ClientSession {
  readonly messages: UserMessage[] = [];
  activeRound: RoundView | null = null;
  /** Offline banner: reads may be stale, mutations are withheld. */
  readOnly = false;
  /** A mutation hit a 409; the round moved on and needs a refresh. */
  staleRound = false;

  constructor(
    readonly api: ApiClient,
    readonly annotatorId: string,
  ) {}

  get view(): ViewState {
    const r = this.activeRound;
    if (r === null) return "idle";
    const mine = (phase: string) => (r.submitted[phase] ?? []).includes(this.annotatorId);
    switch (r.phase) {
      case "annotating":
        return mine("annotating") ? "waiting" : "annotate";
      case "missed_review":
        return mine("missed_review") ? "waiting" : "review";
      case "discussion":
        return r.lead_id === this.annotatorId ? "resolve" : "waiting";
      case "codebook_update":
        return r.lead_id === this.annotatorId ? "close" : "waiting";
      case "closed":
        return "dashboard";
    }
  }

  /** Replace the cached round with what the server just said. */
  reconcile(view: RoundView): void {
    this.activeRound = view;
    this.staleRound = false;
    this.online();
  }

  async refreshRound(): Promise<void> {
    if (this.activeRound === null) return;
    try {
      this.reconcile(await this.api.getRound(this.activeRound.id));
    } catch (err) {
      this.surface(err);
    }
  }

  /**
   * Run a mutation and reconcile with the returned round view.  Every
   * failure lands in `messages` with the server's wording untouched;
   * returns whether the mutation went through.
   */
  async mutate(run: () => Promise<RoundView>): Promise<boolean> {
    try {
      this.reconcile(await run());
      return true;
    } catch (err) {
      this.surface(err);
      return false;
    }
  }

  /** Push an error where the user will see it; rethrows non-API bugs. */
  surface(err: unknown): void {
    if (err instanceof OfflineError) {
      this.readOnly = true;
      this.push("offline", "Server unreachable; showing the last known state read-only.");
      return;
    }
    if (err instanceof ApiError) {
      this.push("error", err.message);
      if (err.status === 409) {
        this.staleRound = true;
        this.push("stale", "The round has moved on since this screen loaded; refresh to rejoin it.");
      }
      return;
    }
    throw err;
  }

  push(kind: UserMessage["kind"], text: string): void {
    this.messages.push({ kind, text });
  }

  /** A successful call proves the server is back; drop the banner. */
  private online(): void {
    this.readOnly = false;
  }
}
