"""The invariant verifier must actually catch broken logs, not just pass
clean ones — each test plants one specific corruption and expects a report."""
import dataclasses

import pytest

from nudgematch.checks import verify_protocol_invariants
from nudgematch.config import CourseConfig, MS_PER_HOUR
from nudgematch.events import EventRecord

from conftest import ide, make_core


def _clean_log():
    core = make_core()
    core.record_heartbeat("s0", 1000, ide("a1"))
    core.record_heartbeat("s1", 1000, ide("a1"))
    ticket = core.initiate_ticket("t1", 1000)
    nudge = core.nudges[ticket.pending_nudge_id]
    core.respond_nudge(nudge.nudge_id, "decline", 2000)
    nudge = core.nudges[ticket.pending_nudge_id]
    core.respond_nudge(nudge.nudge_id, "accept", 3000)
    core.end_session(ticket.session_id, 10_000)
    return list(core.log)


def _with(record, **payload_overrides):
    return dataclasses.replace(record, payload={**record.payload, **payload_overrides})


def test_clean_log_has_no_violations():
    assert verify_protocol_invariants(_clean_log()) == []


def test_detects_duplicate_pending_nudge_on_ticket():
    log = _clean_log()
    first_sent = next(r for r in log if r.kind == "nudge_sent")
    dup = dataclasses.replace(first_sent, seq=len(log) + 1,
                              payload={**first_sent.payload, "nudge_id": "N99",
                                       "student_id": "s2",
                                       "sent_at": first_sent.payload["sent_at"]})
    # re-open the ticket state by appending right after the original send
    idx = log.index(first_sent) + 1
    broken = log[:idx] + [dup]
    out = verify_protocol_invariants(broken)
    assert any("second pending nudge" in v for v in out)


def test_detects_repeat_nudge_within_ticket():
    log = _clean_log()
    sends = [r for r in log if r.kind == "nudge_sent"]
    second = sends[1]
    repeat = _with(second, student_id=sends[0].payload["student_id"])
    broken = [repeat if r is second else r for r in log]
    out = verify_protocol_invariants(broken)
    assert any("nudged twice" in v for v in out)


def test_detects_cooldown_violation():
    core = make_core()
    core.record_heartbeat("s0", 1000, ide("a1"))
    t1 = core.initiate_ticket("t1", 1000)
    core.respond_nudge(t1.pending_nudge_id, "decline", 2000)
    log = list(core.log)
    sent = next(r for r in log if r.kind == "nudge_sent")
    again = dataclasses.replace(sent, seq=len(log) + 1, payload={
        **sent.payload, "nudge_id": "N99", "ticket_id": "T99",
        "sent_at": sent.payload["sent_at"] + MS_PER_HOUR})
    init = next(r for r in log if r.kind == "ticket_initiated")
    second_ticket = dataclasses.replace(init, seq=len(log) + 2, payload={
        **init.payload, "ticket_id": "T99", "teacher_id": "t2"})
    out = verify_protocol_invariants(log + [second_ticket, again])
    assert any("cooldown" in v for v in out)


def test_detects_late_response():
    log = _clean_log()
    accepted = next(r for r in log if r.kind == "nudge_accepted")
    nudge_sent = next(r for r in log if r.kind == "nudge_sent"
                      and r.payload["nudge_id"] == accepted.payload["nudge_id"])
    late = _with(accepted, ts=nudge_sent.payload["deadline"] + 1)
    broken = [late if r is accepted else r for r in log]
    out = verify_protocol_invariants(broken)
    assert any("after deadline" in v for v in out)


def test_detects_match_without_accept():
    log = _clean_log()
    broken = [r for r in log if r.kind != "nudge_accepted"]
    out = verify_protocol_invariants(broken)
    assert any("MATCHED with 0 accepted" in v for v in out)


def test_detects_session_on_exhausted_ticket():
    log = _clean_log()
    broken = []
    for r in log:
        if r.kind == "ticket_matched":
            broken.append(EventRecord(seq=r.seq, ts=r.ts, kind="ticket_exhausted",
                                      payload={"ticket_id": r.payload["ticket_id"]}))
        else:
            broken.append(r)
    out = verify_protocol_invariants(broken)
    assert any("EXHAUSTED but has a session" in v for v in out)


def test_detects_pending_past_deadline_at_log_end():
    core = make_core()
    core.record_heartbeat("s0", 1000, ide("a1"))
    core.initiate_ticket("t1", 1000)
    # a much later unrelated record proves the deadline has passed unresolved
    core.record_heartbeat("s1", MS_PER_HOUR, ide("a1"))
    out = verify_protocol_invariants(core.log)
    assert any("still pending past its deadline" in v for v in out)
