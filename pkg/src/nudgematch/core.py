"""The serialized core: single total order of commands over all state.

Commands validate against current state, then commit one or more EventRecords.
Committing is the only way state changes: each record is appended to the log,
optionally written through a sink (write-ahead), applied, and fanned out to
observers. Replaying a log therefore rebuilds the exact same state, verified
by `state_hash`.
"""
import hashlib
import json
import random
from typing import Callable, Iterable, List, Optional

from . import events as ev
from .config import CourseConfig
from .errors import (
    AlreadyRecorded,
    DuplicateSession,
    NudgeExpired,
    NudgeNotFound,
    NudgeNotPending,
    ScoreOutOfRange,
    SessionClosed,
    SessionLive,
    SessionNotFound,
    TeacherBusy,
    TicketNotFound,
    TicketTerminal,
)
from .eligibility import NudgableQuery, nudgable_set
from .events import EventRecord
from .matchmaker import (
    Nudge,
    NudgeOutcome,
    NudgeTicket,
    SelectionPolicy,
    TicketState,
    select_candidate,
)
from .presence import ActivityContext, PresenceTable
from .session import (
    Author,
    Gratitude,
    Rating,
    Session,
    SessionEvent,
    SessionEventKind,
    check_event_permission,
)

ADMIN = "admin"


class Core:
    def __init__(self, config: Optional[CourseConfig] = None, rng_seed: int = 0,
                 sink: Optional[Callable[[EventRecord], None]] = None):
        self.config = CourseConfig()
        self.experiment_fraction = self.config.experiment_fraction
        self.presence = PresenceTable(self.config.online_window_ms)
        self.completions: dict = {}        # sid -> {assignment_id: ts}
        self.tickets: dict = {}
        self.nudges: dict = {}
        self.sessions: dict = {}
        self._last_nudge_sent: dict = {}   # sid -> ts of most recent offer
        self._pending_nudge_by_student: dict = {}
        self._live_ticket_by_teacher: dict = {}
        self._live_session_by_user: dict = {}
        self.log: List[EventRecord] = []
        self._seq = 0
        self._last_ts = 0
        self._counters = {"T": 0, "N": 0, "S": 0}
        self.rng = random.Random(rng_seed)
        self.sink = sink
        self.observers: List[Callable[[EventRecord], None]] = []
        if config is not None:
            config.validate()
            self._commit(0, ev.COURSE_CONFIGURED, config.to_dict())

    # ------------------------------------------------------------------ commit

    def _commit(self, now: int, kind: str, payload: dict) -> EventRecord:
        self._seq += 1
        ts = max(now, self._last_ts)
        record = EventRecord(seq=self._seq, ts=ts, kind=kind, payload=payload)
        self._last_ts = ts
        self.log.append(record)
        if self.sink is not None:
            self.sink(record)
        self._apply(record)
        for obs in self.observers:
            obs(record)
        return record

    def _new_id(self, prefix: str) -> str:
        self._counters[prefix] += 1
        return f"{prefix}{self._counters[prefix]}"

    def _track_id(self, ident: str):
        prefix, num = ident[0], int(ident[1:])
        if num > self._counters[prefix]:
            self._counters[prefix] = num

    # ---------------------------------------------------------------- presence

    def record_heartbeat(self, student_id: str, ts: int, context: ActivityContext):
        if not isinstance(context, ActivityContext):
            context = ActivityContext.from_dict(context)
        self.presence.check_beat(student_id, ts)
        self._commit(ts, ev.HEARTBEAT, {
            "student_id": student_id, "ts": ts, "context": context.to_dict(),
        })
        return self.presence.get(student_id)

    def is_online(self, student_id: str, now: int) -> bool:
        return self.presence.is_online(student_id, now)

    def active_assignment(self, student_id: str, now: int) -> Optional[str]:
        return self.presence.active_assignment(student_id, now)

    # ---------------------------------------------------------------- progress

    def complete_assignment(self, student_id: str, assignment_id: str, ts: int):
        done = self.completions.get(student_id, {})
        if assignment_id in done:
            return  # completion is monotone; duplicates are no-ops
        self._commit(ts, ev.ASSIGNMENT_COMPLETED, {
            "student_id": student_id, "assignment_id": assignment_id, "ts": ts,
        })

    def progress_of(self, student_id: str, now: int) -> float:
        total = len(self.config.assignment_ids)
        if total == 0:
            return 0.0
        return len(self.completions.get(student_id, {})) / total

    # ------------------------------------------------------------- experiment

    def set_experiment_fraction(self, fraction: float, now: int):
        assert 0.0 <= fraction <= 1.0
        self._commit(now, ev.EXPERIMENT_FRACTION_CHANGED, {"fraction": fraction})

    # ------------------------------------------------- eligibility read surface

    def last_nudge_sent_at(self, student_id: str) -> Optional[int]:
        return self._last_nudge_sent.get(student_id)

    def has_pending_nudge(self, student_id: str) -> bool:
        return student_id in self._pending_nudge_by_student

    def has_live_session(self, user_id: str) -> bool:
        return user_id in self._live_session_by_user

    def nudgable(self, query: NudgableQuery):
        return nudgable_set(self, query)

    # --------------------------------------------------------------- tickets

    def initiate_ticket(self, teacher_id: str, now: int,
                        policy: SelectionPolicy = SelectionPolicy.RANDOM) -> NudgeTicket:
        if teacher_id in self._live_ticket_by_teacher:
            raise TeacherBusy(f"{teacher_id} already has a live ticket")
        if teacher_id in self._live_session_by_user:
            raise TeacherBusy(f"{teacher_id} is in a live session")
        ticket_id = self._new_id("T")
        self._commit(now, ev.TICKET_INITIATED, {
            "ticket_id": ticket_id,
            "teacher_id": teacher_id,
            "created_at": now,
            "search_deadline": now + self.config.search_window_ms,
            "policy": SelectionPolicy(policy).value,
        })
        ticket = self.tickets[ticket_id]
        self._advance_search(ticket, now)
        return ticket

    def _advance_search(self, ticket: NudgeTicket, now: int):
        assert ticket.state is TicketState.SEARCHING
        if now >= ticket.search_deadline:
            self._commit(now, ev.TICKET_EXHAUSTED, {"ticket_id": ticket.ticket_id})
            return
        candidate = select_candidate(self, ticket, now, self.rng)
        if candidate is None:
            self._commit(now, ev.TICKET_EXHAUSTED, {"ticket_id": ticket.ticket_id})
            return
        nudge_id = self._new_id("N")
        self._commit(now, ev.NUDGE_SENT, {
            "nudge_id": nudge_id,
            "ticket_id": ticket.ticket_id,
            "student_id": candidate,
            "sent_at": now,
            "deadline": now + self.config.response_window_ms,
            "assignment_id": self.active_assignment(candidate, now),
        })

    def respond_nudge(self, nudge_id: str, response: str, now: int) -> NudgeTicket:
        response = response.upper()
        if response not in ("ACCEPT", "DECLINE"):
            raise ValueError(f"unknown response {response!r}")
        nudge = self.nudges.get(nudge_id)
        if nudge is None:
            raise NudgeNotFound(nudge_id)
        if nudge.outcome is not NudgeOutcome.PENDING:
            raise NudgeNotPending(f"{nudge_id} already {nudge.outcome.value}")
        ticket = self.tickets[nudge.ticket_id]
        if now > nudge.deadline:
            # late response: the timeout path applies before the caller sees the error
            self._expire(nudge, ticket, nudge.deadline)
            raise NudgeExpired(f"{nudge_id} deadline was {nudge.deadline}, response at {now}")
        if response == "ACCEPT":
            self._commit(now, ev.NUDGE_ACCEPTED, {"nudge_id": nudge_id, "ts": now})
            self._create_session(ticket, nudge, now)
        else:
            self._commit(now, ev.NUDGE_DECLINED, {"nudge_id": nudge_id, "ts": now})
            self._advance_search(ticket, now)
        return ticket

    def expire_nudge(self, nudge_id: str, now: int) -> NudgeTicket:
        nudge = self.nudges.get(nudge_id)
        if nudge is None:
            raise NudgeNotFound(nudge_id)
        if nudge.outcome is not NudgeOutcome.PENDING:
            raise NudgeNotPending(f"{nudge_id} already {nudge.outcome.value}")
        ticket = self.tickets[nudge.ticket_id]
        if now < nudge.deadline:
            return ticket  # not yet due; scheduler re-queues
        self._expire(nudge, ticket, now)
        return ticket

    def _expire(self, nudge: Nudge, ticket: NudgeTicket, now: int):
        self._commit(now, ev.NUDGE_TIMED_OUT, {"nudge_id": nudge.nudge_id, "ts": now})
        self._advance_search(ticket, now)

    def cancel_ticket(self, ticket_id: str, now: int) -> NudgeTicket:
        ticket = self.tickets.get(ticket_id)
        if ticket is None:
            raise TicketNotFound(ticket_id)
        if ticket.terminal:
            raise TicketTerminal(f"{ticket_id} is {ticket.state.value}")
        if ticket.pending_nudge_id is not None:
            self._commit(now, ev.NUDGE_CANCELLED, {"nudge_id": ticket.pending_nudge_id, "ts": now})
        self._commit(now, ev.TICKET_CANCELLED, {"ticket_id": ticket_id})
        return ticket

    # --------------------------------------------------------------- sessions

    def _create_session(self, ticket: NudgeTicket, nudge: Nudge, now: int) -> Session:
        if ticket.session_id is not None:
            raise DuplicateSession(f"ticket {ticket.ticket_id} already has a session")
        session_id = self._new_id("S")
        assignment = self.active_assignment(nudge.student_id, now) or nudge.assignment_id
        self._commit(now, ev.TICKET_MATCHED, {
            "ticket_id": ticket.ticket_id, "session_id": session_id,
        })
        self._commit(now, ev.SESSION_CREATED, {
            "session_id": session_id,
            "ticket_id": ticket.ticket_id,
            "teacher_id": ticket.teacher_id,
            "student_id": nudge.student_id,
            "assignment_id": assignment,
            "started_at": now,
        })
        return self.sessions[session_id]

    def _get_session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise SessionNotFound(session_id)
        return session

    def append_session_event(self, session_id: str, author_id: str,
                             kind: SessionEventKind, payload: str, now: int) -> int:
        session = self._get_session(session_id)
        if not session.live:
            raise SessionClosed(session_id)
        author = session.author_of(author_id)
        kind = SessionEventKind(kind)
        check_event_permission(author, kind)
        seq = session.next_seq()
        self._commit(now, ev.SESSION_EVENT, {
            "session_id": session_id, "seq": seq,
            "author": author.value, "kind": kind.value, "payload": payload,
        })
        return seq

    def end_session(self, session_id: str, now: int, ended_by: str = ADMIN) -> Session:
        session = self._get_session(session_id)
        if not session.live:
            raise SessionClosed(session_id)
        if ended_by != ADMIN:
            session.author_of(ended_by)  # NotParticipant if a stranger
        self._commit(now, ev.SESSION_ENDED, {
            "session_id": session_id, "ended_at": now, "ended_by": ended_by,
        })
        return session

    def record_gratitude(self, session_id: str, thanked: bool,
                         message: Optional[str] = None, now: Optional[int] = None) -> Session:
        session = self._get_session(session_id)
        if session.live:
            raise SessionLive(session_id)
        if session.gratitude is not None:
            raise AlreadyRecorded(f"gratitude for {session_id}")
        self._commit(now if now is not None else self._last_ts, ev.GRATITUDE_RECORDED, {
            "session_id": session_id, "thanked": bool(thanked), "message": message,
        })
        return session

    def release_gratitude(self, session_id: str, now: Optional[int] = None) -> Session:
        """Admin moderation step that makes a gratitude message visible to the teacher."""
        session = self._get_session(session_id)
        if session.gratitude is None:
            raise AlreadyRecorded(f"no gratitude recorded for {session_id}")
        self._commit(now if now is not None else self._last_ts, ev.GRATITUDE_RELEASED,
                     {"session_id": session_id})
        return session

    def record_rating(self, session_id: str, score: int,
                      comment: Optional[str] = None, now: Optional[int] = None) -> Session:
        session = self._get_session(session_id)
        if session.live:
            raise SessionLive(session_id)
        if not isinstance(score, int) or not 1 <= score <= 5:
            raise ScoreOutOfRange(f"score {score} not in 1..5")
        if session.rating is not None:
            raise AlreadyRecorded(f"rating for {session_id}")
        self._commit(now if now is not None else self._last_ts, ev.RATING_RECORDED, {
            "session_id": session_id, "score": score, "comment": comment,
        })
        return session

    def teacher_gratitude_summary(self, teacher_id: str) -> dict:
        thank_count = 0
        released = []
        for session in self.sessions.values():
            if session.teacher_id != teacher_id or session.gratitude is None:
                continue
            if session.gratitude.thanked:
                thank_count += 1
            if session.gratitude.released_to_teacher and session.gratitude.message:
                released.append(session.gratitude.message)
        return {"thank_count": thank_count, "released_messages": released}

    # ----------------------------------------------------------------- timers

    def due_nudges(self, now: int):
        return [n.nudge_id for n in self.nudges.values()
                if n.outcome is NudgeOutcome.PENDING and now >= n.deadline]

    def idle_sessions(self, now: int):
        limit = self.config.session_idle_timeout_ms
        return [s.session_id for s in self.sessions.values()
                if s.live and now - s.last_activity_at >= limit]

    def run_timers(self, now: int):
        """Fire every due scheduled expiry: nudge deadlines and idle sessions."""
        for nudge_id in self.due_nudges(now):
            self.expire_nudge(nudge_id, now)
        for session_id in self.idle_sessions(now):
            self.end_session(session_id, now, ended_by=ADMIN)

    def next_deadline(self) -> Optional[int]:
        pending = [n.deadline for n in self.nudges.values()
                   if n.outcome is NudgeOutcome.PENDING]
        idle = [s.last_activity_at + self.config.session_idle_timeout_ms
                for s in self.sessions.values() if s.live]
        due = pending + idle
        return min(due) if due else None

    # ------------------------------------------------------------------ apply

    def _apply(self, record: EventRecord):
        handler = getattr(self, f"_apply_{record.kind}", None)
        assert handler is not None, f"no apply handler for {record.kind}"
        handler(record.ts, record.payload)

    def _apply_course_configured(self, ts, p):
        self.config = CourseConfig.from_dict(p)
        self.experiment_fraction = self.config.experiment_fraction
        self.presence.online_window_ms = self.config.online_window_ms

    def _apply_experiment_fraction_changed(self, ts, p):
        self.experiment_fraction = p["fraction"]

    def _apply_heartbeat(self, ts, p):
        self.presence.apply_beat(p["student_id"], p["ts"], ActivityContext.from_dict(p["context"]))

    def _apply_assignment_completed(self, ts, p):
        self.completions.setdefault(p["student_id"], {})[p["assignment_id"]] = p["ts"]

    def _apply_ticket_initiated(self, ts, p):
        self._track_id(p["ticket_id"])
        ticket = NudgeTicket(
            ticket_id=p["ticket_id"], teacher_id=p["teacher_id"],
            created_at=p["created_at"], search_deadline=p["search_deadline"],
            policy=SelectionPolicy(p["policy"]),
        )
        self.tickets[ticket.ticket_id] = ticket
        self._live_ticket_by_teacher[ticket.teacher_id] = ticket.ticket_id

    def _apply_nudge_sent(self, ts, p):
        self._track_id(p["nudge_id"])
        nudge = Nudge(
            nudge_id=p["nudge_id"], ticket_id=p["ticket_id"], student_id=p["student_id"],
            sent_at=p["sent_at"], deadline=p["deadline"], assignment_id=p.get("assignment_id"),
        )
        self.nudges[nudge.nudge_id] = nudge
        ticket = self.tickets[nudge.ticket_id]
        ticket.transition(TicketState.NUDGE_PENDING)
        ticket.pending_nudge_id = nudge.nudge_id
        ticket.nudged.append(nudge.student_id)
        self._pending_nudge_by_student[nudge.student_id] = nudge.nudge_id
        self._last_nudge_sent[nudge.student_id] = nudge.sent_at

    def _resolve_nudge(self, nudge_id: str, outcome: NudgeOutcome, ts: int) -> Nudge:
        nudge = self.nudges[nudge_id]
        nudge.outcome = outcome
        nudge.resolved_at = ts
        self._pending_nudge_by_student.pop(nudge.student_id, None)
        ticket = self.tickets[nudge.ticket_id]
        ticket.pending_nudge_id = None
        return nudge

    def _apply_nudge_accepted(self, ts, p):
        self._resolve_nudge(p["nudge_id"], NudgeOutcome.ACCEPTED, p["ts"])

    def _apply_nudge_declined(self, ts, p):
        nudge = self._resolve_nudge(p["nudge_id"], NudgeOutcome.DECLINED, p["ts"])
        self.tickets[nudge.ticket_id].transition(TicketState.SEARCHING)

    def _apply_nudge_timed_out(self, ts, p):
        nudge = self._resolve_nudge(p["nudge_id"], NudgeOutcome.TIMED_OUT, p["ts"])
        self.tickets[nudge.ticket_id].transition(TicketState.SEARCHING)

    def _apply_nudge_cancelled(self, ts, p):
        self._resolve_nudge(p["nudge_id"], NudgeOutcome.CANCELLED, p["ts"])

    def _close_ticket(self, ticket_id: str, state: TicketState, ts: int) -> NudgeTicket:
        ticket = self.tickets[ticket_id]
        ticket.transition(state)
        ticket.resolved_at = ts
        if self._live_ticket_by_teacher.get(ticket.teacher_id) == ticket_id:
            del self._live_ticket_by_teacher[ticket.teacher_id]
        return ticket

    def _apply_ticket_matched(self, ts, p):
        self._track_id(p["session_id"])
        ticket = self.tickets[p["ticket_id"]]
        ticket.session_id = p["session_id"]
        self._close_ticket(p["ticket_id"], TicketState.MATCHED, ts)

    def _apply_ticket_exhausted(self, ts, p):
        self._close_ticket(p["ticket_id"], TicketState.EXHAUSTED, ts)

    def _apply_ticket_cancelled(self, ts, p):
        self._close_ticket(p["ticket_id"], TicketState.CANCELLED, ts)

    def _apply_session_created(self, ts, p):
        self._track_id(p["session_id"])
        session = Session(
            session_id=p["session_id"], ticket_id=p["ticket_id"],
            teacher_id=p["teacher_id"], student_id=p["student_id"],
            assignment_id=p.get("assignment_id"), started_at=p["started_at"],
        )
        self.sessions[session.session_id] = session
        self._live_session_by_user[session.teacher_id] = session.session_id
        self._live_session_by_user[session.student_id] = session.session_id

    def _apply_session_event(self, ts, p):
        session = self.sessions[p["session_id"]]
        session.events.append(SessionEvent(
            seq=p["seq"], author=Author(p["author"]),
            kind=SessionEventKind(p["kind"]), payload=p["payload"],
        ))
        session.last_activity_at = ts

    def _apply_session_ended(self, ts, p):
        session = self.sessions[p["session_id"]]
        session.ended_at = p["ended_at"]
        for user in session.participants():
            if self._live_session_by_user.get(user) == session.session_id:
                del self._live_session_by_user[user]

    def _apply_gratitude_recorded(self, ts, p):
        self.sessions[p["session_id"]].gratitude = Gratitude(
            thanked=p["thanked"], message=p.get("message"), released_to_teacher=False,
        )

    def _apply_gratitude_released(self, ts, p):
        self.sessions[p["session_id"]].gratitude.released_to_teacher = True

    def _apply_rating_recorded(self, ts, p):
        self.sessions[p["session_id"]].rating = Rating(
            score=p["score"], comment=p.get("comment"),
        )

    # ----------------------------------------------------------------- replay

    @classmethod
    def replay(cls, records: Iterable[EventRecord], rng_seed: int = 0,
               sink: Optional[Callable[[EventRecord], None]] = None) -> "Core":
        core = cls(config=None, rng_seed=rng_seed)
        for record in ev.validate_sequence(records):
            core._seq = record.seq
            core._last_ts = record.ts
            core.log.append(record)
            core._apply(record)
        core.sink = sink
        return core

    # ------------------------------------------------------------- state hash

    def state_snapshot(self) -> dict:
        def nudge_dict(n: Nudge):
            return {
                "ticket_id": n.ticket_id, "student_id": n.student_id,
                "sent_at": n.sent_at, "deadline": n.deadline,
                "assignment_id": n.assignment_id,
                "outcome": n.outcome.value, "resolved_at": n.resolved_at,
            }

        def ticket_dict(t: NudgeTicket):
            return {
                "teacher_id": t.teacher_id, "created_at": t.created_at,
                "search_deadline": t.search_deadline, "policy": t.policy.value,
                "state": t.state.value, "pending_nudge_id": t.pending_nudge_id,
                "session_id": t.session_id, "nudged": t.nudged,
                "resolved_at": t.resolved_at,
            }

        def session_dict(s: Session):
            return {
                "ticket_id": s.ticket_id, "teacher_id": s.teacher_id,
                "student_id": s.student_id, "assignment_id": s.assignment_id,
                "started_at": s.started_at, "ended_at": s.ended_at,
                "events": [[e.seq, e.author.value, e.kind.value, e.payload] for e in s.events],
                "gratitude": None if s.gratitude is None else [
                    s.gratitude.thanked, s.gratitude.message, s.gratitude.released_to_teacher],
                "rating": None if s.rating is None else [s.rating.score, s.rating.comment],
                "last_activity_at": s.last_activity_at,
            }

        return {
            "seq": self._seq,
            "last_ts": self._last_ts,
            "config": self.config.to_dict(),
            "experiment_fraction": self.experiment_fraction,
            "presence": self.presence.snapshot(),
            "completions": {s: dict(sorted(c.items())) for s, c in sorted(self.completions.items())},
            "tickets": {tid: ticket_dict(t) for tid, t in sorted(self.tickets.items())},
            "nudges": {nid: nudge_dict(n) for nid, n in sorted(self.nudges.items())},
            "sessions": {sid: session_dict(s) for sid, s in sorted(self.sessions.items())},
            "counters": dict(self._counters),
        }

    def state_hash(self) -> str:
        blob = json.dumps(self.state_snapshot(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()
