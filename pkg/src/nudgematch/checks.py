"""Full-log protocol invariant scan.

Independent of the core's internal indexes: walks the raw event records and
re-derives every protocol guarantee from scratch. Used by the simulator-as-
fuzzer acceptance suite; any violation is reported as a human-readable string.
"""
from typing import List, Sequence

from . import events as ev
from .config import CourseConfig


def verify_protocol_invariants(records: Sequence) -> List[str]:
    violations: List[str] = []
    config = CourseConfig()

    nudges = {}           # nudge_id -> dict
    tickets = {}          # ticket_id -> dict
    sessions = {}         # session_id -> dict
    pending_by_ticket = {}
    pending_by_student = {}
    sent_history = {}     # student_id -> list of sent_at

    def bad(msg):
        violations.append(msg)

    for rec in records:
        p = rec.payload
        if rec.kind == ev.COURSE_CONFIGURED:
            config = CourseConfig.from_dict(p)
        elif rec.kind == ev.TICKET_INITIATED:
            tickets[p["ticket_id"]] = {
                "teacher": p["teacher_id"], "state": "SEARCHING",
                "nudged": [], "accepted": 0, "sessions": 0,
            }
        elif rec.kind == ev.NUDGE_SENT:
            tid, sid, nid = p["ticket_id"], p["student_id"], p["nudge_id"]
            ticket = tickets[tid]
            if pending_by_ticket.get(tid):
                bad(f"seq {rec.seq}: ticket {tid} got a second pending nudge {nid}")
            if sid in pending_by_student:
                bad(f"seq {rec.seq}: student {sid} got a second pending nudge {nid}")
            if sid in ticket["nudged"]:
                bad(f"seq {rec.seq}: student {sid} nudged twice by ticket {tid}")
            for prev in sent_history.get(sid, []):
                if p["sent_at"] - prev < config.cooldown_ms:
                    bad(f"seq {rec.seq}: student {sid} re-nudged {p['sent_at'] - prev} ms "
                        f"after previous offer (cooldown {config.cooldown_ms} ms)")
            ticket["nudged"].append(sid)
            ticket["state"] = "NUDGE_PENDING"
            pending_by_ticket[tid] = nid
            pending_by_student[sid] = nid
            sent_history.setdefault(sid, []).append(p["sent_at"])
            nudges[nid] = {"ticket": tid, "student": sid,
                           "sent_at": p["sent_at"], "deadline": p["deadline"]}
        elif rec.kind in (ev.NUDGE_ACCEPTED, ev.NUDGE_DECLINED,
                          ev.NUDGE_TIMED_OUT, ev.NUDGE_CANCELLED):
            nudge = nudges[p["nudge_id"]]
            tid = nudge["ticket"]
            if pending_by_ticket.get(tid) != p["nudge_id"]:
                bad(f"seq {rec.seq}: resolution of non-pending nudge {p['nudge_id']}")
            pending_by_ticket.pop(tid, None)
            pending_by_student.pop(nudge["student"], None)
            if rec.kind in (ev.NUDGE_ACCEPTED, ev.NUDGE_DECLINED):
                if p["ts"] > nudge["deadline"]:
                    bad(f"seq {rec.seq}: response at {p['ts']} after deadline {nudge['deadline']}")
            if rec.kind == ev.NUDGE_ACCEPTED:
                tickets[tid]["accepted"] += 1
            else:
                tickets[tid]["state"] = "SEARCHING"
        elif rec.kind == ev.TICKET_MATCHED:
            tickets[p["ticket_id"]]["state"] = "MATCHED"
        elif rec.kind == ev.TICKET_EXHAUSTED:
            tickets[p["ticket_id"]]["state"] = "EXHAUSTED"
        elif rec.kind == ev.TICKET_CANCELLED:
            tickets[p["ticket_id"]]["state"] = "CANCELLED"
        elif rec.kind == ev.SESSION_CREATED:
            tickets[p["ticket_id"]]["sessions"] += 1
            sessions[p["session_id"]] = {"ticket": p["ticket_id"]}

    for nid in pending_by_ticket.values():
        # unresolved at end of log is fine only if the log ends before the deadline
        nudge = nudges[nid]
        if records and records[-1].ts > nudge["deadline"]:
            bad(f"nudge {nid} still pending past its deadline at end of log")

    for tid, ticket in tickets.items():
        if ticket["state"] == "MATCHED":
            if ticket["accepted"] != 1:
                bad(f"ticket {tid} MATCHED with {ticket['accepted']} accepted nudges")
            if ticket["sessions"] != 1:
                bad(f"ticket {tid} MATCHED with {ticket['sessions']} sessions")
        elif ticket["state"] in ("EXHAUSTED", "CANCELLED"):
            if ticket["sessions"] != 0:
                bad(f"ticket {tid} {ticket['state']} but has a session")
            if ticket["accepted"] != 0:
                bad(f"ticket {tid} {ticket['state']} but has an accepted nudge")

    return violations
