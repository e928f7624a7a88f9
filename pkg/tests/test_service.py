import json
import time

import pytest
from fastapi.testclient import TestClient

from nudgematch.matchmaker import NudgeOutcome
from nudgematch.service import build_app

from conftest import make_core


class _Clock:
    def __init__(self, now=1_000_000):
        self.now = now

    def __call__(self):
        return self.now


def _auth(user):
    return {"Authorization": f"Bearer {user}"}


@pytest.fixture
def world():
    core = make_core()
    clock = _Clock()
    app = build_app(core, clock=clock, run_timers=False)
    with TestClient(app) as client:
        yield client, core, clock


def _beat(client, student, assignment="a1"):
    return client.post(f"/students/{student}/heartbeat", headers=_auth(student),
                       json={"context": {"kind": "IDE_ASSIGNMENT",
                                         "assignment_id": assignment}})


def _match(client, clock, teacher="t1", student="s1"):
    """Drive one ticket through accept; returns (ticket_id, nudge_id, session_id)."""
    assert _beat(client, student).status_code == 200
    ticket = client.post("/tickets", headers=_auth(teacher)).json()
    nudge_id = ticket["pending_nudge_id"]
    clock.now += 1000
    resp = client.post(f"/nudges/{nudge_id}/respond", headers=_auth(student),
                       json={"response": "ACCEPT"})
    assert resp.status_code == 200
    return ticket["ticket_id"], nudge_id, resp.json()["session_id"]


# ----------------------------------------------------------------------- auth


def test_missing_or_malformed_token_is_401(world):
    client, _, _ = world
    assert client.post("/tickets").status_code == 401
    assert client.post("/tickets", headers={"Authorization": "Basic x"}).status_code == 401
    assert client.post("/tickets", headers={"Authorization": "Bearer "}).status_code == 401


def test_token_must_match_student(world):
    client, _, _ = world
    resp = client.post("/students/s1/heartbeat", headers=_auth("s2"), json={})
    assert resp.status_code == 401


def test_malformed_json_body_is_400(world):
    client, _, _ = world
    resp = client.post("/students/s1/heartbeat", headers=_auth("s1"),
                       content=b"{not json")
    assert resp.status_code == 400
    resp = client.post("/students/s1/heartbeat", headers=_auth("s1"), content=b"[1,2]")
    assert resp.status_code == 400


# ------------------------------------------------------------------ happy path


def test_full_match_flow_over_http(world):
    client, core, clock = world
    resp = _beat(client, "s1")
    assert resp.status_code == 200
    assert resp.json()["context"]["assignment_id"] == "a1"

    ticket_resp = client.post("/tickets", headers=_auth("t1"))
    assert ticket_resp.status_code == 201
    ticket = ticket_resp.json()
    assert ticket["state"] == "NUDGE_PENDING"
    assert ticket["nudged"] == ["s1"]

    nudge_id = ticket["pending_nudge_id"]
    clock.now += 5000
    accept = client.post(f"/nudges/{nudge_id}/respond", headers=_auth("s1"),
                         json={"response": "accept"})
    assert accept.status_code == 200
    assert accept.json()["state"] == "MATCHED"
    session_id = accept.json()["session_id"]

    assert client.post(f"/sessions/{session_id}/events", headers=_auth("t1"),
                       json={"kind": "CHAT", "payload": "hi"}).json() == {"seq": 1}
    got = client.get(f"/sessions/{session_id}", headers=_auth("s1"))
    assert got.status_code == 200
    assert got.json()["event_count"] == 1
    assert client.get(f"/sessions/{session_id}", headers=_auth("s9")).status_code == 401

    clock.now += 60_000
    ended = client.post(f"/sessions/{session_id}/end", headers=_auth("s1"))
    assert ended.status_code == 200
    assert ended.json()["ended_at"] == clock.now

    assert client.post(f"/sessions/{session_id}/gratitude", headers=_auth("s1"),
                       json={"thanked": True, "message": "ty"}).status_code == 200
    assert client.post(f"/sessions/{session_id}/rating", headers=_auth("t1"),
                       json={"score": 5}).status_code == 200
    summary = client.get("/teachers/t1/gratitude", headers=_auth("t1")).json()
    assert summary["thank_count"] == 1


def test_completion_endpoint_updates_progress(world):
    client, core, clock = world
    assert client.post("/students/s1/completions", headers=_auth("s1"),
                       json={"assignment_id": "a1"}).status_code == 200
    assert core.progress_of("s1", clock.now) == 0.2
    assert client.post("/students/s1/completions", headers=_auth("s1"),
                       json={}).status_code == 400


# --------------------------------------------------------------- error mapping


def test_teacher_busy_maps_to_409(world):
    client, _, clock = world
    _beat(client, "s1")
    _beat(client, "s2")
    assert client.post("/tickets", headers=_auth("t1")).status_code == 201
    resp = client.post("/tickets", headers=_auth("t1"))
    assert resp.status_code == 409
    assert resp.json()["error"] == "TeacherBusy"


def test_expired_nudge_maps_to_410(world):
    client, core, clock = world
    _beat(client, "s1")
    ticket = client.post("/tickets", headers=_auth("t1")).json()
    nudge_id = ticket["pending_nudge_id"]
    clock.now = core.nudges[nudge_id].deadline + 1
    resp = client.post(f"/nudges/{nudge_id}/respond", headers=_auth("s1"),
                       json={"response": "ACCEPT"})
    assert resp.status_code == 410
    assert core.nudges[nudge_id].outcome is NudgeOutcome.TIMED_OUT


def test_teacher_code_edit_maps_to_403(world):
    client, _, clock = world
    _, _, session_id = _match(client, clock)
    resp = client.post(f"/sessions/{session_id}/events", headers=_auth("t1"),
                       json={"kind": "CODE_EDIT", "payload": "x=1"})
    assert resp.status_code == 403
    assert resp.json()["error"] == "EditForbidden"


def test_unknown_ticket_and_nudge_are_404(world):
    client, _, _ = world
    assert client.get("/tickets/T404", headers=_auth("t1")).status_code == 404
    assert client.post("/nudges/N404/respond", headers=_auth("s1"),
                       json={"response": "ACCEPT"}).status_code == 404


def test_invalid_response_value_is_400(world):
    client, _, _ = world
    assert client.post("/nudges/N1/respond", headers=_auth("s1"),
                       json={"response": "MAYBE"}).status_code == 400


def test_only_owner_respond_and_cancel(world):
    client, _, clock = world
    _beat(client, "s1")
    ticket = client.post("/tickets", headers=_auth("t1")).json()
    nudge_id = ticket["pending_nudge_id"]
    assert client.post(f"/nudges/{nudge_id}/respond", headers=_auth("s2"),
                       json={"response": "ACCEPT"}).status_code == 401
    assert client.post(f"/tickets/{ticket['ticket_id']}/cancel",
                       headers=_auth("t2")).status_code == 401
    cancelled = client.post(f"/tickets/{ticket['ticket_id']}/cancel", headers=_auth("t1"))
    assert cancelled.status_code == 200
    assert cancelled.json()["state"] == "CANCELLED"


def test_gratitude_and_rating_role_checks(world):
    client, _, clock = world
    _, _, session_id = _match(client, clock)
    client.post(f"/sessions/{session_id}/end", headers=_auth("t1"))
    assert client.post(f"/sessions/{session_id}/gratitude", headers=_auth("t1"),
                       json={"thanked": True}).status_code == 401
    assert client.post(f"/sessions/{session_id}/rating", headers=_auth("s1"),
                       json={"score": 5}).status_code == 401
    assert client.post(f"/sessions/{session_id}/rating", headers=_auth("t1"),
                       json={"score": 9}).status_code == 422


# ----------------------------------------------------------------------- misc


def test_admin_stats(world):
    client, core, clock = world
    _match(client, clock)
    stats = client.get("/admin/stats", headers=_auth("admin")).json()
    assert stats["tickets"] == {"MATCHED": 1}
    assert stats["sessions"] == 1
    assert stats["live_sessions"] == 1
    assert stats["state_hash"] == core.state_hash()


def test_timer_loop_expires_overdue_nudges():
    core = make_core()
    clock = _Clock()
    app = build_app(core, clock=clock, run_timers=True)
    with TestClient(app) as client:
        _beat(client, "s1")
        ticket = client.post("/tickets", headers=_auth("t1")).json()
        nudge_id = ticket["pending_nudge_id"]
        clock.now = core.nudges[nudge_id].deadline
        deadline = time.time() + 5
        while core.nudges[nudge_id].outcome is NudgeOutcome.PENDING:
            assert time.time() < deadline, "timer loop never fired"
            time.sleep(0.05)
        assert core.nudges[nudge_id].outcome is NudgeOutcome.TIMED_OUT


# ----------------------------------------------------------------------- SSE
#
# The in-process test client buffers whole responses, which never happens for
# an endless event stream, so these run against a real server on localhost.

import contextlib
import socket
import threading

import httpx
import uvicorn


@contextlib.contextmanager
def _live_server(app):
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port,
                                           log_level="error"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        assert time.time() < deadline, "server failed to start"
        time.sleep(0.01)
    try:
        yield f"http://127.0.0.1:{port}"
    finally:
        server.should_exit = True
        thread.join(timeout=10)


def _sse_records(response, limit):
    """Parse the first `limit` data frames from an SSE byte stream."""
    out = []
    for line in response.iter_lines():
        if line.startswith("data: "):
            out.append(json.loads(line[len("data: "):]))
            if len(out) == limit:
                break
    return out


@pytest.fixture
def live_world():
    core = make_core()
    clock = _Clock()
    app = build_app(core, clock=clock, run_timers=False)
    with _live_server(app) as base_url:
        with httpx.Client(base_url=base_url, timeout=10) as client:
            yield client, core, clock


def test_stream_backlog_is_audience_filtered(live_world):
    client, core, clock = live_world
    _match(client, clock, teacher="t1", student="s1")
    _beat(client, "s2")

    with client.stream("GET", "/stream", headers=_auth("s1")) as resp:
        assert resp.status_code == 200
        frames = _sse_records(resp, 5)
    kinds = [f["kind"] for f in frames]
    assert kinds == ["heartbeat", "nudge_sent", "nudge_accepted",
                     "ticket_matched", "session_created"]
    # s2 only ever sees their own heartbeat
    with client.stream("GET", "/stream", headers=_auth("s2")) as resp:
        frames = _sse_records(resp, 1)
    assert [f["kind"] for f in frames] == ["heartbeat"]
    assert frames[0]["payload"]["student_id"] == "s2"


def test_stream_resumes_after_last_seq(live_world):
    client, core, clock = live_world
    _match(client, clock, teacher="t1", student="s1")
    with client.stream("GET", "/stream", headers=_auth("s1")) as resp:
        first = _sse_records(resp, 2)
    cursor = first[-1]["seq"]
    with client.stream("GET", f"/stream?last_seq={cursor}", headers=_auth("s1")) as resp:
        rest = _sse_records(resp, 3)
    assert [f["seq"] for f in first + rest] == sorted(f["seq"] for f in first + rest)
    assert {f["seq"] for f in first} & {f["seq"] for f in rest} == set()
    assert [f["kind"] for f in rest] == ["nudge_accepted", "ticket_matched",
                                         "session_created"]


def test_stream_delivers_live_events(live_world):
    client, core, clock = live_world
    _beat(client, "s1")
    with client.stream("GET", "/stream", headers=_auth("s1")) as resp:
        lines = resp.iter_lines()

        def next_frame():
            for line in lines:
                if line.startswith("data: "):
                    return json.loads(line[len("data: "):])
            raise AssertionError("stream ended early")

        assert next_frame()["kind"] == "heartbeat"
        # a new command while the stream is open arrives as a live frame
        client.post("/tickets", headers=_auth("t1"))
        live = next_frame()
        assert live["kind"] == "nudge_sent"
        assert live["payload"]["student_id"] == "s1"
