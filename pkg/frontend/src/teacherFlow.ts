/** Teacher dashboard state: a pure fold over the event stream.
 *
 * idle -> (ticket_initiated) -> searching -> matched | exhausted | cancelled.
 * Because each state is derived only from the last applied event, a reload
 * that replays the stream from any cursor lands in the same view.
 */
import type { EventRecord } from "./types.js";

export type TeacherView =
  | { kind: "idle" }
  | { kind: "searching"; ticketId: string; nudgedCount: number }
  | { kind: "matched"; ticketId: string; sessionId: string }
  | { kind: "exhausted"; ticketId: string }
  | { kind: "cancelled"; ticketId: string };

export const IDLE: TeacherView = { kind: "idle" };

export function reduceTeacherView(view: TeacherView, record: EventRecord): TeacherView {
  const p = record.payload;
  switch (record.kind) {
    case "ticket_initiated":
      return { kind: "searching", ticketId: p.ticket_id as string, nudgedCount: 0 };
    case "nudge_sent":
      if (view.kind === "searching" && view.ticketId === p.ticket_id) {
        return { ...view, nudgedCount: view.nudgedCount + 1 };
      }
      return view;
    case "ticket_matched":
      if (ticketOf(view) === p.ticket_id) {
        return {
          kind: "matched",
          ticketId: p.ticket_id as string,
          sessionId: p.session_id as string,
        };
      }
      return view;
    case "ticket_exhausted":
      if (ticketOf(view) === p.ticket_id) {
        return { kind: "exhausted", ticketId: p.ticket_id as string };
      }
      return view;
    case "ticket_cancelled":
      if (ticketOf(view) === p.ticket_id) {
        return { kind: "cancelled", ticketId: p.ticket_id as string };
      }
      return view;
    default:
      return view;
  }
}

function ticketOf(view: TeacherView): string | null {
  return view.kind === "idle" ? null : view.ticketId;
}
