import { describe, expect, it } from "vitest";

import { IDLE, reduceTeacherView, type TeacherView } from "../src/teacherFlow.js";
import type { EventRecord } from "../src/types.js";

let seq = 0;
function rec(kind: string, payload: Record<string, unknown>): EventRecord {
  seq += 1;
  return { seq, ts: seq * 1000, kind, payload };
}

function fold(records: EventRecord[], start: TeacherView = IDLE): TeacherView {
  return records.reduce(reduceTeacherView, start);
}

describe("teacher dashboard reducer", () => {
  it("walks idle -> searching -> matched", () => {
    const view = fold([
      rec("ticket_initiated", { ticket_id: "T1" }),
      rec("nudge_sent", { ticket_id: "T1", nudge_id: "N1" }),
      rec("nudge_declined", { ticket_id: "T1", nudge_id: "N1" }),
      rec("nudge_sent", { ticket_id: "T1", nudge_id: "N2" }),
      rec("ticket_matched", { ticket_id: "T1", session_id: "S1" }),
    ]);
    expect(view).toEqual({ kind: "matched", ticketId: "T1", sessionId: "S1" });
  });

  it("counts each nudge while searching", () => {
    const view = fold([
      rec("ticket_initiated", { ticket_id: "T1" }),
      rec("nudge_sent", { ticket_id: "T1", nudge_id: "N1" }),
      rec("nudge_sent", { ticket_id: "T1", nudge_id: "N2" }),
      rec("nudge_sent", { ticket_id: "T1", nudge_id: "N3" }),
    ]);
    expect(view).toEqual({ kind: "searching", ticketId: "T1", nudgedCount: 3 });
  });

  it("ends in exhausted when no student accepts", () => {
    const view = fold([
      rec("ticket_initiated", { ticket_id: "T1" }),
      rec("nudge_sent", { ticket_id: "T1", nudge_id: "N1" }),
      rec("ticket_exhausted", { ticket_id: "T1" }),
    ]);
    expect(view).toEqual({ kind: "exhausted", ticketId: "T1" });
  });

  it("ends in cancelled when the teacher gives up", () => {
    const view = fold([
      rec("ticket_initiated", { ticket_id: "T1" }),
      rec("ticket_cancelled", { ticket_id: "T1" }),
    ]);
    expect(view).toEqual({ kind: "cancelled", ticketId: "T1" });
  });

  it("ignores records about a different ticket", () => {
    const searching = fold([
      rec("ticket_initiated", { ticket_id: "T1" }),
      rec("nudge_sent", { ticket_id: "T1", nudge_id: "N1" }),
    ]);
    const after = fold(
      [
        rec("nudge_sent", { ticket_id: "T9", nudge_id: "N9" }),
        rec("ticket_matched", { ticket_id: "T9", session_id: "S9" }),
        rec("ticket_exhausted", { ticket_id: "T9" }),
      ],
      searching,
    );
    expect(after).toEqual(searching);
  });

  it("ignores unrelated stream kinds", () => {
    const view = fold([
      rec("student_heartbeat", { student_id: "s1" }),
      rec("session_event", { session_id: "S1", kind: "CHAT" }),
    ]);
    expect(view).toEqual(IDLE);
  });

  it("a fresh ticket after exhaustion restarts the flow", () => {
    const view = fold([
      rec("ticket_initiated", { ticket_id: "T1" }),
      rec("ticket_exhausted", { ticket_id: "T1" }),
      rec("ticket_initiated", { ticket_id: "T2" }),
      rec("nudge_sent", { ticket_id: "T2", nudge_id: "N5" }),
    ]);
    expect(view).toEqual({ kind: "searching", ticketId: "T2", nudgedCount: 1 });
  });
});
