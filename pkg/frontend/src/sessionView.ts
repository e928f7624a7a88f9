/** Shared session page: chat, a code pane the student owns, a run button
 * both sides may press.
 *
 * The transcript is a fold over session events in seq order. Edit
 * permission is enforced client-side (the teacher's code pane is
 * read-only); the server rejects a forced CODE_EDIT with 403 anyway.
 * Chat uses optimistic local echo, reconciled when the event comes back.
 */
import type { EventRecord, Role, SessionEventKind } from "./types.js";

export function canEdit(role: Role): boolean {
  return role === "STUDENT";
}

export function canRun(_role: Role): boolean {
  return true;
}

export interface TranscriptEntry {
  seq: number;
  author: Role;
  kind: SessionEventKind;
  payload: string;
  pending?: boolean; // local echo not yet confirmed by the stream
}

export interface SessionApi {
  postSessionEvent(
    sessionId: string,
    kind: SessionEventKind,
    payload: string,
  ): Promise<{ seq: number }>;
}

export type ClosedForm = "gratitude" | "rating";

export class SessionViewModel {
  transcript: TranscriptEntry[] = [];
  codeText = "";
  ended = false;

  constructor(
    readonly sessionId: string,
    readonly role: Role,
    private readonly api: SessionApi,
  ) {}

  /** Form shown once the session is over: student thanks, teacher rates. */
  get closedForm(): ClosedForm | null {
    if (!this.ended) return null;
    return this.role === "STUDENT" ? "gratitude" : "rating";
  }

  /** Apply one stream record; ignores records for other sessions. */
  apply(record: EventRecord): void {
    const p = record.payload;
    if (p.session_id !== this.sessionId) return;
    if (record.kind === "session_ended") {
      this.ended = true;
      return;
    }
    if (record.kind !== "session_event") return;
    const entry: TranscriptEntry = {
      seq: p.seq as number,
      author: p.author as Role,
      kind: p.kind as SessionEventKind,
      payload: p.payload as string,
    };
    // replace the optimistic echo if present, otherwise insert in seq order
    const pending = this.transcript.findIndex(
      (e) => e.pending && e.kind === entry.kind && e.payload === entry.payload,
    );
    if (pending >= 0) this.transcript.splice(pending, 1);
    this.transcript.push(entry);
    this.transcript.sort((a, b) => (a.pending ? 1 : a.seq) - (b.pending ? 1 : b.seq));
    if (entry.kind === "CODE_EDIT") this.codeText = entry.payload;
  }

  async sendChat(text: string): Promise<void> {
    this.transcript.push({ seq: Number.MAX_SAFE_INTEGER, author: this.role,
                           kind: "CHAT", payload: text, pending: true });
    await this.api.postSessionEvent(this.sessionId, "CHAT", text);
  }

  /** Student-only; the teacher's pane never reaches this call. */
  async sendCodeEdit(text: string): Promise<void> {
    if (!canEdit(this.role)) {
      throw new Error("code pane is read-only for the teacher");
    }
    this.codeText = text;
    await this.api.postSessionEvent(this.sessionId, "CODE_EDIT", text);
  }

  async sendRun(): Promise<void> {
    await this.api.postSessionEvent(this.sessionId, "CODE_RUN", "");
  }
}
