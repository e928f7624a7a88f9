"""HTTP front door: command API, per-user server-sent event streams, stats.

All mutations funnel through one asyncio lock into the core's serialized
command order; the write-ahead sink persists records before the response is
sent. Streams are at-least-once with the global seq attached to every frame,
so clients resume with ?last_seq=n and dedupe by seq.
"""
import asyncio
import json
import time
from typing import Optional, Set

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from . import events as ev
from .core import ADMIN, Core
from .errors import DomainError, Unauthorized
from .events import EventRecord
from .matchmaker import Nudge, NudgeTicket, SelectionPolicy
from .presence import ActivityContext
from .session import Session

TIMER_TICK_SECONDS = 0.25


def _ticket_json(t: NudgeTicket) -> dict:
    return {
        "ticket_id": t.ticket_id, "teacher_id": t.teacher_id,
        "created_at": t.created_at, "search_deadline": t.search_deadline,
        "policy": t.policy.value, "state": t.state.value,
        "pending_nudge_id": t.pending_nudge_id, "session_id": t.session_id,
        "nudged": list(t.nudged),
    }


def _nudge_json(n: Nudge) -> dict:
    return {
        "nudge_id": n.nudge_id, "ticket_id": n.ticket_id, "student_id": n.student_id,
        "sent_at": n.sent_at, "deadline": n.deadline, "outcome": n.outcome.value,
    }


def _session_json(s: Session) -> dict:
    return {
        "session_id": s.session_id, "ticket_id": s.ticket_id,
        "teacher_id": s.teacher_id, "student_id": s.student_id,
        "assignment_id": s.assignment_id, "started_at": s.started_at,
        "ended_at": s.ended_at, "event_count": len(s.events),
    }


def audience(core: Core, record: EventRecord) -> Set[str]:
    """Principals whose stream carries this record."""
    p = record.payload
    kind = record.kind
    if kind == ev.HEARTBEAT:
        return {p["student_id"]}
    if kind == ev.ASSIGNMENT_COMPLETED:
        return {p["student_id"]}
    if kind in (ev.TICKET_INITIATED, ev.TICKET_MATCHED, ev.TICKET_EXHAUSTED,
                ev.TICKET_CANCELLED):
        ticket = core.tickets.get(p["ticket_id"])
        out = {ticket.teacher_id} if ticket else set()
        if kind == ev.TICKET_MATCHED and ticket and ticket.session_id:
            session = core.sessions.get(p["session_id"])
            if session:
                out.add(session.student_id)
        return out
    if kind in (ev.NUDGE_SENT, ev.NUDGE_ACCEPTED, ev.NUDGE_DECLINED,
                ev.NUDGE_TIMED_OUT, ev.NUDGE_CANCELLED):
        nudge = core.nudges.get(p["nudge_id"])
        if nudge is None:
            return set()
        ticket = core.tickets.get(nudge.ticket_id)
        out = {nudge.student_id}
        if ticket:
            out.add(ticket.teacher_id)
        return out
    if kind in (ev.SESSION_CREATED, ev.SESSION_EVENT, ev.SESSION_ENDED,
                ev.GRATITUDE_RECORDED, ev.GRATITUDE_RELEASED, ev.RATING_RECORDED):
        session = core.sessions.get(p["session_id"])
        return set(session.participants()) if session else set()
    return set()  # config/admin records are not user-visible


class ServiceState:
    def __init__(self, core: Core, clock=None):
        self.core = core
        self.clock = clock or (lambda: int(time.time() * 1000))
        self.lock = asyncio.Lock()
        self.subscribers: dict = {}  # principal -> set of asyncio.Queue
        core.observers.append(self._fan_out)

    def now(self) -> int:
        return max(self.clock(), self.core._last_ts)

    def _fan_out(self, record: EventRecord):
        for principal in audience(self.core, record):
            for queue in self.subscribers.get(principal, ()):  # pragma: no branch
                queue.put_nowait(record)

    def subscribe(self, principal: str) -> asyncio.Queue:
        queue = asyncio.Queue()
        self.subscribers.setdefault(principal, set()).add(queue)
        return queue

    def unsubscribe(self, principal: str, queue: asyncio.Queue):
        self.subscribers.get(principal, set()).discard(queue)


def _principal(request: Request) -> str:
    header = request.headers.get("authorization", "")
    if not header.lower().startswith("bearer ") or not header[7:].strip():
        raise Unauthorized("missing bearer token")
    return header[7:].strip()


async def _body(request: Request) -> dict:
    raw = await request.body()
    if not raw:
        return {}
    try:
        data = json.loads(raw)
    except json.JSONDecodeError:
        raise ValueError("malformed JSON body")
    if not isinstance(data, dict):
        raise ValueError("body must be a JSON object")
    return data


def build_app(core: Core, clock=None, run_timers: bool = True) -> FastAPI:
    state = ServiceState(core, clock=clock)
    app = FastAPI(title="nudgematch")
    app.state.service = state

    @app.exception_handler(DomainError)
    async def domain_error_handler(request, exc: DomainError):
        return JSONResponse(status_code=exc.http_status,
                            content={"error": exc.code, "detail": exc.detail})

    @app.exception_handler(ValueError)
    async def value_error_handler(request, exc: ValueError):
        return JSONResponse(status_code=400, content={"error": "BadRequest",
                                                      "detail": str(exc)})

    async def timer_loop():
        while True:
            await asyncio.sleep(TIMER_TICK_SECONDS)
            async with state.lock:
                state.core.run_timers(state.now())

    @app.on_event("startup")
    async def start_timers():
        if run_timers:
            app.state.timer_task = asyncio.create_task(timer_loop())

    @app.on_event("shutdown")
    async def stop_timers():
        task = getattr(app.state, "timer_task", None)
        if task:
            task.cancel()

    # ------------------------------------------------------------- commands

    @app.post("/students/{student_id}/heartbeat", status_code=200)
    async def heartbeat(student_id: str, request: Request):
        principal = _principal(request)
        body = await _body(request)
        if principal != student_id:
            raise Unauthorized("token does not match student id")
        context = ActivityContext.from_dict(body.get("context", {"kind": "OTHER_PAGE"}))
        async with state.lock:
            ts = int(body.get("ts", state.now()))
            record = state.core.record_heartbeat(student_id, ts, context)
        return {"student_id": student_id, "last_heartbeat": record.last_heartbeat,
                "context": record.context.to_dict()}

    @app.post("/students/{student_id}/completions", status_code=200)
    async def complete(student_id: str, request: Request):
        principal = _principal(request)
        body = await _body(request)
        if principal != student_id:
            raise Unauthorized("token does not match student id")
        assignment_id = body.get("assignment_id")
        if not assignment_id:
            raise ValueError("assignment_id required")
        async with state.lock:
            state.core.complete_assignment(student_id, assignment_id, state.now())
        return {"ok": True}

    @app.post("/tickets", status_code=201)
    async def create_ticket(request: Request):
        principal = _principal(request)
        body = await _body(request)
        policy = SelectionPolicy(body.get("policy", "RANDOM"))
        async with state.lock:
            ticket = state.core.initiate_ticket(principal, state.now(), policy)
        return _ticket_json(ticket)

    @app.post("/tickets/{ticket_id}/cancel")
    async def cancel_ticket(ticket_id: str, request: Request):
        principal = _principal(request)
        async with state.lock:
            ticket = state.core.tickets.get(ticket_id)
            if ticket is not None and ticket.teacher_id != principal:
                raise Unauthorized("not your ticket")
            ticket = state.core.cancel_ticket(ticket_id, state.now())
        return _ticket_json(ticket)

    @app.get("/tickets/{ticket_id}")
    async def get_ticket(ticket_id: str, request: Request):
        _principal(request)
        ticket = state.core.tickets.get(ticket_id)
        if ticket is None:
            return JSONResponse(status_code=404,
                                content={"error": "TicketNotFound", "detail": ticket_id})
        return _ticket_json(ticket)

    @app.post("/nudges/{nudge_id}/respond")
    async def respond(nudge_id: str, request: Request):
        principal = _principal(request)
        body = await _body(request)
        response = body.get("response", "")
        if str(response).upper() not in ("ACCEPT", "DECLINE"):
            raise ValueError("response must be ACCEPT or DECLINE")
        async with state.lock:
            nudge = state.core.nudges.get(nudge_id)
            if nudge is not None and nudge.student_id != principal:
                raise Unauthorized("not your nudge")
            ticket = state.core.respond_nudge(nudge_id, response, state.now())
        return _ticket_json(ticket)

    @app.post("/sessions/{session_id}/events")
    async def session_event(session_id: str, request: Request):
        principal = _principal(request)
        body = await _body(request)
        async with state.lock:
            seq = state.core.append_session_event(
                session_id, principal, body.get("kind", ""),
                str(body.get("payload", "")), state.now())
        return {"seq": seq}

    @app.post("/sessions/{session_id}/end")
    async def end_session(session_id: str, request: Request):
        principal = _principal(request)
        async with state.lock:
            session = state.core.end_session(session_id, state.now(), ended_by=principal)
        return _session_json(session)

    @app.post("/sessions/{session_id}/gratitude")
    async def gratitude(session_id: str, request: Request):
        principal = _principal(request)
        body = await _body(request)
        async with state.lock:
            session = state.core.sessions.get(session_id)
            if session is not None and principal != session.student_id:
                raise Unauthorized("only the helped student records gratitude")
            session = state.core.record_gratitude(
                session_id, bool(body.get("thanked", False)),
                body.get("message"), now=state.now())
        return _session_json(session)

    @app.post("/sessions/{session_id}/rating")
    async def rating(session_id: str, request: Request):
        principal = _principal(request)
        body = await _body(request)
        async with state.lock:
            session = state.core.sessions.get(session_id)
            if session is not None and principal != session.teacher_id:
                raise Unauthorized("only the teacher rates the session")
            session = state.core.record_rating(
                session_id, body.get("score"), body.get("comment"), now=state.now())
        return _session_json(session)

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str, request: Request):
        principal = _principal(request)
        session = state.core._get_session(session_id)
        if principal not in session.participants() and principal != ADMIN:
            raise Unauthorized("not a participant")
        return _session_json(session)

    @app.get("/teachers/{teacher_id}/gratitude")
    async def gratitude_summary(teacher_id: str, request: Request):
        _principal(request)
        return state.core.teacher_gratitude_summary(teacher_id)

    @app.get("/admin/stats")
    async def stats(request: Request):
        _principal(request)
        core = state.core
        by_state = {}
        for ticket in core.tickets.values():
            by_state[ticket.state.value] = by_state.get(ticket.state.value, 0) + 1
        return {
            "seq": core._seq,
            "last_ts": core._last_ts,
            "students_seen": len(list(core.presence.known_ids())),
            "tickets": by_state,
            "sessions": len(core.sessions),
            "live_sessions": sum(1 for s in core.sessions.values() if s.live),
            "state_hash": core.state_hash(),
        }

    # --------------------------------------------------------------- stream

    @app.get("/stream")
    async def stream(request: Request, last_seq: int = 0):
        principal = _principal(request)

        async def generate():
            async with state.lock:
                backlog = [rec for rec in state.core.log
                           if rec.seq > last_seq and principal in audience(state.core, rec)]
                queue = state.subscribe(principal)
            try:
                for rec in backlog:
                    yield f"id: {rec.seq}\ndata: {rec.to_json()}\n\n"
                delivered = backlog[-1].seq if backlog else last_seq
                while True:
                    if await request.is_disconnected():
                        break
                    try:
                        rec = await asyncio.wait_for(queue.get(), timeout=1.0)
                    except asyncio.TimeoutError:
                        yield ": keepalive\n\n"
                        continue
                    if rec.seq <= delivered:
                        continue
                    delivered = rec.seq
                    yield f"id: {rec.seq}\ndata: {rec.to_json()}\n\n"
            finally:
                state.unsubscribe(principal, queue)

        return StreamingResponse(generate(), media_type="text/event-stream")

    return app
