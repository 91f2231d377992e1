/**
 * HTTP client for the workbench API.  Every call carries the session's
 * bearer token; every non-2xx response is parsed into an ApiError
 * carrying the server's own error type and message so screens can show
 * it verbatim.  A fetch that never reaches the server (network down)
 * becomes an OfflineError instead.
 */

export type RoundPhase =
  | "annotating"
  | "missed_review"
  | "discussion"
  | "codebook_update"
  | "closed";

export interface RoundView {
  id: string;
  index: number;
  chapter_id: string;
  participants: string[];
  lead_id: string;
  phase: RoundPhase;
  submitted: Record<string, string[]>;
  version: number;
}

export interface SectionView {
  id: string;
  heading: string;
  body: string;
  char_count: number;
}

export interface ChapterView {
  id: string;
  index: number;
  title: string;
  sections: SectionView[];
}

export interface TextbookView {
  id: string;
  title: string;
  chapters: ChapterView[];
}

export interface ReviewCandidate {
  section_id: string;
  concept: string;
  gram_length: number;
  tagged_by: string[];
}

export interface DisagreementCase extends ReviewCandidate {
  support: number;
}

export interface AgreementReport {
  scope: string;
  phase_label: "before_discussion" | "after_discussion";
  partition: Record<string, unknown[]>;
  pairwise: Record<string, number>;
  mean_pairwise: number;
  full_consensus_fraction: number;
  sections?: AgreementReport[];
}

export interface CodebookRule {
  id: string;
  text: string;
  examples: [string, string][];
  round_introduced: number;
  amendments: unknown[];
}

export interface ConvergenceReport {
  additions: [number, number][];
  converged_at: number | null;
}

export interface BucketCell {
  count: number;
  percent: string;
}

export interface StatsColumn {
  buckets: Record<string, BucketCell>;
  total: number;
  oversized: number;
}

export type StatsTable = Record<string, StatsColumn>;

export interface AnnotationSpanInput {
  section_id: string;
  start: number;
  end: number;
}

export interface DecisionInput {
  section_id: string;
  concept: string;
  verdict: "accept" | "reject";
  start?: number;
  end?: number;
  rationale?: string;
}

export interface ResolutionInput {
  section_id: string;
  concept: string;
  outcome: "promote" | "drop";
  start?: number;
  end?: number;
  rule_suggestions?: string[];
}

export interface ChangeInput {
  action: "add" | "amend";
  text: string;
  examples?: [string, string][];
  rule_id?: string;
}

export interface QualifyResult {
  annotator_id: string;
  score: number;
  passed: boolean;
}

/** A 4xx/5xx answer from the server, message preserved verbatim. */
export class ApiError extends Error {
  constructor(
    public readonly kind: string,
    message: string,
    public readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** The server could not be reached at all. */
export class OfflineError extends Error {
  constructor(cause: unknown) {
    super(`server unreachable: ${cause instanceof Error ? cause.message : String(cause)}`);
    this.name = "OfflineError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = {
      method,
      headers: {
        Authorization: `Bearer ${this.token}`,
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
      },
      ...(body !== undefined ? { body: JSON.stringify(body) } : {}),
    };
    let res: Response;
    try {
      res = await this.fetchImpl(this.baseUrl + path, init);
    } catch (cause) {
      throw new OfflineError(cause);
    }
    if (!res.ok) {
      let kind = "HttpError";
      let message = `${res.status} ${res.statusText}`;
      try {
        const envelope = (await res.json()) as { error?: { type?: string; message?: string } };
        if (envelope.error) {
          kind = envelope.error.type ?? kind;
          message = envelope.error.message ?? message;
        }
      } catch {
        // non-JSON error body; keep the status line
      }
      throw new ApiError(kind, message, res.status);
    }
    return (await res.json()) as T;
  }

  getTextbook(id: string): Promise<TextbookView> {
    return this.request("GET", `/textbooks/${encodeURIComponent(id)}`);
  }

  listRounds(): Promise<RoundView[]> {
    return this.request("GET", "/rounds");
  }

  getRound(id: string): Promise<RoundView> {
    return this.request("GET", `/rounds/${encodeURIComponent(id)}`);
  }

  submitAnnotations(
    roundId: string,
    annotations: AnnotationSpanInput[],
    roundVersion?: number,
  ): Promise<RoundView> {
    return this.request("POST", `/rounds/${encodeURIComponent(roundId)}/submit/annotating`, {
      annotations,
      round_version: roundVersion ?? null,
    });
  }

  reviewCandidates(roundId: string, annotatorId: string): Promise<ReviewCandidate[]> {
    return this.request(
      "GET",
      `/rounds/${encodeURIComponent(roundId)}/review/${encodeURIComponent(annotatorId)}`,
    );
  }

  submitReview(
    roundId: string,
    annotatorId: string,
    decisions: DecisionInput[],
    roundVersion?: number,
  ): Promise<RoundView> {
    return this.request(
      "POST",
      `/rounds/${encodeURIComponent(roundId)}/review/${encodeURIComponent(annotatorId)}`,
      { decisions, round_version: roundVersion ?? null },
    );
  }

  disagreements(roundId: string): Promise<DisagreementCase[]> {
    return this.request("GET", `/rounds/${encodeURIComponent(roundId)}/disagreements`);
  }

  submitResolutions(
    roundId: string,
    resolutions: ResolutionInput[],
    roundVersion?: number,
  ): Promise<RoundView> {
    return this.request("POST", `/rounds/${encodeURIComponent(roundId)}/resolutions`, {
      resolutions,
      round_version: roundVersion ?? null,
    });
  }

  closeRound(roundId: string, changes: ChangeInput[], roundVersion?: number): Promise<RoundView> {
    return this.request("POST", `/rounds/${encodeURIComponent(roundId)}/close`, {
      changes,
      round_version: roundVersion ?? null,
    });
  }

  agreement(roundId: string, phase: "before_discussion" | "after_discussion"): Promise<AgreementReport> {
    return this.request(
      "GET",
      `/rounds/${encodeURIComponent(roundId)}/agreement?phase=${phase}`,
    );
  }

  codebook(): Promise<{ rules: CodebookRule[] }> {
    return this.request("GET", "/codebook");
  }

  convergence(): Promise<ConvergenceReport> {
    return this.request("GET", "/codebook/convergence");
  }

  statsTable(): Promise<StatsTable> {
    return this.request("GET", "/stats/table");
  }

  qualificationInfo(): Promise<{ gold_section_id: string; threshold: number }> {
    return this.request("GET", "/qualification");
  }

  qualify(annotatorId: string, concepts: string[]): Promise<QualifyResult> {
    return this.request("POST", `/annotators/${encodeURIComponent(annotatorId)}/qualify`, {
      concepts,
    });
  }
}
