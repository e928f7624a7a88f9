/** Thin client over the service HTTP API.
 *
 * Every request carries the principal id as a bearer token. Domain errors
 * come back as {error, detail} JSON with a meaningful status; they are
 * rethrown as ApiError so views can branch on the code (e.g. 410 on a late
 * nudge response renders "offer expired").
 */
import type { SessionEventKind, SessionJson, TicketJson } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail: string,
  ) {
    super(`${code}: ${detail}`);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly principal: string,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: {
        authorization: `Bearer ${this.principal}`,
        "content-type": "application/json",
      },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const data = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      throw new ApiError(resp.status, data.error ?? "Unknown", data.detail ?? "");
    }
    return data as T;
  }

  heartbeat(context: { kind: string; assignment_id?: string }): Promise<unknown> {
    return this.call("POST", `/students/${this.principal}/heartbeat`, { context });
  }

  createTicket(policy = "RANDOM"): Promise<TicketJson> {
    return this.call("POST", "/tickets", { policy });
  }

  cancelTicket(ticketId: string): Promise<TicketJson> {
    return this.call("POST", `/tickets/${ticketId}/cancel`);
  }

  getTicket(ticketId: string): Promise<TicketJson> {
    return this.call("GET", `/tickets/${ticketId}`);
  }

  respondNudge(nudgeId: string, response: "ACCEPT" | "DECLINE"): Promise<TicketJson> {
    return this.call("POST", `/nudges/${nudgeId}/respond`, { response });
  }

  postSessionEvent(
    sessionId: string,
    kind: SessionEventKind,
    payload: string,
  ): Promise<{ seq: number }> {
    return this.call("POST", `/sessions/${sessionId}/events`, { kind, payload });
  }

  endSession(sessionId: string): Promise<SessionJson> {
    return this.call("POST", `/sessions/${sessionId}/end`);
  }

  getSession(sessionId: string): Promise<SessionJson> {
    return this.call("GET", `/sessions/${sessionId}`);
  }

  recordGratitude(sessionId: string, thanked: boolean, message?: string): Promise<SessionJson> {
    return this.call("POST", `/sessions/${sessionId}/gratitude`, { thanked, message });
  }

  recordRating(sessionId: string, score: number, comment?: string): Promise<SessionJson> {
    return this.call("POST", `/sessions/${sessionId}/rating`, { score, comment });
  }

  gratitudeSummary(teacherId: string): Promise<{ thank_count: number; released_messages: string[] }> {
    return this.call("GET", `/teachers/${teacherId}/gratitude`);
  }
}
