import {
  AgreementReport,
  ApiClient,
  ApiError,
  CodebookRule,
  ConvergenceReport,
  RoundView,
  StatsTable,
} from "./api.js";

export interface PhaseNumbers {
  mean: number;
  fullConsensus: number;
  pairwise: Record<string, number>;
}

export interface AgreementRow {
  roundId: string;
  index: number;
  chapterId: string;
  phase: RoundView["phase"];
  before: PhaseNumbers | null;
  after: PhaseNumbers | null;
  /** The server's own explanation when a report is not available yet. */
  pending: string | null;
}

export interface DashboardData {
  rows: AgreementRow[];
  convergence: ConvergenceReport | null;
  convergenceNote: string | null;
  rules: CodebookRule[];
  stats: StatsTable | null;
  statsNote: string | null;
}

function numbers(report: AgreementReport): PhaseNumbers {
  return {
    mean: report.mean_pairwise,
    fullConsensus: report.full_consensus_fraction,
    pairwise: report.pairwise,
  };
}

/**
 * One dashboard row per round: before/after agreement where the server
 * can compute them, its refusal message where it cannot (a round still
 * collecting submissions answers 409).
 */
export async function agreementRow(api: ApiClient, round: RoundView): Promise<AgreementRow> {
  const row: AgreementRow = {
    roundId: round.id,
    index: round.index,
    chapterId: round.chapter_id,
    phase: round.phase,
    before: null,
    after: null,
    pending: null,
  };
  try {
    row.before = numbers(await api.agreement(round.id, "before_discussion"));
    row.after = numbers(await api.agreement(round.id, "after_discussion"));
  } catch (err) {
    if (err instanceof ApiError) {
      row.pending = err.message;
    } else {
      throw err;
    }
  }
  return row;
}

/** Everything the dashboard shows, fetched in one pass. */
export async function loadDashboard(api: ApiClient): Promise<DashboardData> {
  const rounds = await api.listRounds();
  const rows: AgreementRow[] = [];
  for (const round of rounds) {
    rows.push(await agreementRow(api, round));
  }

  const data: DashboardData = {
    rows,
    convergence: null,
    convergenceNote: null,
    rules: (await api.codebook()).rules,
    stats: null,
    statsNote: null,
  };

  try {
    data.convergence = await api.convergence();
  } catch (err) {
    if (err instanceof ApiError) data.convergenceNote = err.message;
    else throw err;
  }
  try {
    data.stats = await api.statsTable();
  } catch (err) {
    if (err instanceof ApiError) data.statsNote = err.message;
    else throw err;
  }
  return data;
}

/** "r1 before 0.67 / after 1.00" style summary used by the round list. */
export function rowSummary(row: AgreementRow): string {
  if (row.pending !== null) return `${row.roundId}: ${row.pending}`;
  const fmt = (n: PhaseNumbers | null) => (n === null ? "-" : n.mean.toFixed(2));
  return `${row.roundId} before ${fmt(row.before)} / after ${fmt(row.after)}`;
}
