import { ApiClient, FetchLike, RoundView } from "../src/api.js";
import { ClientSession } from "../src/session.js";

export interface CannedResponse {
  status: number;
  body: unknown;
}

export type RouteHandler = (body: unknown) => CannedResponse;

/**
 * Scripted stand-in for the server: routes are "METHOD /path" keys, the
 * handler sees the parsed request body.  Unrouted requests fail the test
 * loudly instead of pretending to be network errors.
 */
export class FakeServer {
  readonly calls: { method: string; path: string; body: unknown }[] = [];
  private readonly routes = new Map<string, RouteHandler>();

  on(method: string, path: string, handler: CannedResponse | RouteHandler): void {
    this.routes.set(`${method} ${path}`, typeof handler === "function" ? handler : () => handler);
  }

  fetch: FetchLike = (input, init) => {
    const url = new URL(input, "http://test.invalid");
    const method = (init?.method ?? "GET").toUpperCase();
    const path = url.pathname + url.search;
    const body = typeof init?.body === "string" ? JSON.parse(init.body) : undefined;
    this.calls.push({ method, path, body });
    const handler = this.routes.get(`${method} ${path}`);
    if (!handler) {
      throw new Error(`unrouted request: ${method} ${path}`);
    }
    const canned = handler(body);
    return Promise.resolve(
      new Response(JSON.stringify(canned.body), {
        status: canned.status,
        headers: { "Content-Type": "application/json" },
      }),
    );
  };
}

export function errorBody(type: string, message: string): CannedResponse["body"] {
  return { error: { type, message } };
}

export function makeRound(overrides: Partial<RoundView> = {}): RoundView {
  return {
    id: "r1",
    index: 1,
    chapter_id: "tb.c01",
    participants: ["ana", "ben", "cat"],
    lead_id: "ana",
    phase: "annotating",
    submitted: {},
    version: 3,
    ...overrides,
  };
}

export function makeSession(
  server: FakeServer,
  annotatorId = "ana",
  round: RoundView | null = makeRound(),
): ClientSession {
  const session = new ClientSession(new ApiClient("", "tok-" + annotatorId, server.fetch), annotatorId);
  session.activeRound = round;
  return session;
}
