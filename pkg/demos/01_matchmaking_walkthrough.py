"""
Matchmaking walkthrough
=======================

Drives the core aggregate by hand through one complete help request:
students heartbeat in, a teacher opens a ticket, offers hop between
students on declines and timeouts, one student accepts, and the pair
chat in a session. Every step is an event in an append-only log, so at
the end we replay the log from scratch and confirm the rebuilt state is
bit-identical.

Run with:  python3 demos/01_matchmaking_walkthrough.py
"""
from nudgematch import (
    ActivityContext,
    ContextKind,
    Core,
    CourseConfig,
    NudgableQuery,
)


def ide(assignment_id):
    return ActivityContext(kind=ContextKind.IDE_ASSIGNMENT, assignment_id=assignment_id)


config = CourseConfig(
    assignment_ids=["warmup", "recursion", "graphs"],
    experiment_fraction=1.0,   # everyone may be offered help in this demo
)
core = Core(config, rng_seed=7)

# Three students working on "recursion" right now; one of them is off on the forum.
now = 1_000_000
core.record_heartbeat("ada", now, ide("recursion"))
core.record_heartbeat("brian", now, ide("recursion"))
core.record_heartbeat("carol", now, ActivityContext(kind=ContextKind.FORUM))
print("nudgable right now:", sorted(core.nudgable(NudgableQuery(now=now))))

# The teacher asks for someone to help; the core immediately offers the
# ticket to one nudgable student with a 30-second response window.
ticket = core.initiate_ticket("prof", now)
nudge = core.nudges[ticket.pending_nudge_id]
print(f"ticket {ticket.ticket_id}: offered to {nudge.student_id}, "
      f"deadline in {(nudge.deadline - now) / 1000:.0f} s")

# First student declines -> the offer hops to the next candidate.
core.respond_nudge(nudge.nudge_id, "decline", now + 5_000)
nudge = core.nudges[ticket.pending_nudge_id]
print(f"declined; offer hopped to {nudge.student_id}")

# Second student accepts just before the deadline -> a session starts.
core.respond_nudge(nudge.nudge_id, "accept", nudge.deadline - 1)
session = core.sessions[ticket.session_id]
print(f"matched! session {session.session_id} on {session.assignment_id!r} "
      f"between {session.teacher_id} and {session.student_id}")

# They talk; only the student may edit code, both may chat and run.
t = session.started_at
core.append_session_event(session.session_id, session.student_id, "CHAT",
                          "my recursion never terminates", t + 1_000)
core.append_session_event(session.session_id, session.teacher_id, "CHAT",
                          "what's your base case?", t + 9_000)
core.append_session_event(session.session_id, session.student_id, "CODE_EDIT",
                          "if n == 0: return 1", t + 30_000)
core.append_session_event(session.session_id, session.student_id, "CODE_RUN",
                          "", t + 35_000)
core.end_session(session.session_id, t + 300_000, ended_by=session.teacher_id)
print(f"session over after {session.duration_ms / 1000:.0f} s, "
      f"{len(session.events)} transcript events")

# Afterwards the student says thanks and the teacher rates the exchange.
core.record_gratitude(session.session_id, thanked=True,
                      message="base cases forever", now=t + 310_000)
core.record_rating(session.session_id, 5, now=t + 320_000)

# The whole history is just events; fold them again and compare state hashes.
replayed = Core.replay(core.log)
print(f"\n{len(core.log)} events in the log")
print("live state hash  :", core.state_hash())
print("replayed from log:", replayed.state_hash())
assert replayed.state_hash() == core.state_hash()
print("replay is bit-identical")
