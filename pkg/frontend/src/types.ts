/** Wire types shared with the HTTP API and event stream. */

export interface EventRecord {
  seq: number;
  ts: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface TicketJson {
  ticket_id: string;
  teacher_id: string;
  created_at: number;
  search_deadline: number;
  policy: string;
  state: "SEARCHING" | "NUDGE_PENDING" | "MATCHED" | "EXHAUSTED" | "CANCELLED";
  pending_nudge_id: string | null;
  session_id: string | null;
  nudged: string[];
}

export interface SessionJson {
  session_id: string;
  ticket_id: string;
  teacher_id: string;
  student_id: string;
  assignment_id: string | null;
  started_at: number;
  ended_at: number | null;
  event_count: number;
}

export type SessionEventKind = "CHAT" | "CODE_EDIT" | "CODE_RUN" | "JOIN" | "LEAVE";
export type Role = "TEACHER" | "STUDENT";

/** One offer as shown to a student: who is asking and how long they have. */
export interface UiNudgeOffer {
  nudgeId: string;
  deadlineTs: number;
  teacherLabel: string;
}
