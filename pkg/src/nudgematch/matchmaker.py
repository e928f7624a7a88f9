"""Ticket and nudge state machines, plus candidate selection policies.

A ticket is one teacher-initiated search. While searching, students are
offered help one at a time; each offer (nudge) has a hard response deadline.
Transition bookkeeping lives in the core aggregate; this module owns the
types, the legal-transition table, and how the next candidate is picked.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

from .eligibility import NudgableQuery, nudgable_set
from .hashing import stable_hash64


class TicketState(str, Enum):
    SEARCHING = "SEARCHING"
    NUDGE_PENDING = "NUDGE_PENDING"
    MATCHED = "MATCHED"
    EXHAUSTED = "EXHAUSTED"
    CANCELLED = "CANCELLED"


TERMINAL_TICKET_STATES = {TicketState.MATCHED, TicketState.EXHAUSTED, TicketState.CANCELLED}

LEGAL_TICKET_TRANSITIONS = {
    TicketState.SEARCHING: {TicketState.NUDGE_PENDING, TicketState.EXHAUSTED, TicketState.CANCELLED},
    TicketState.NUDGE_PENDING: {TicketState.MATCHED, TicketState.SEARCHING, TicketState.CANCELLED},
    TicketState.MATCHED: set(),
    TicketState.EXHAUSTED: set(),
    TicketState.CANCELLED: set(),
}


class SelectionPolicy(str, Enum):
    RANDOM = "RANDOM"
    MOST_BEHIND = "MOST_BEHIND"


class NudgeOutcome(str, Enum):
    PENDING = "PENDING"
    ACCEPTED = "ACCEPTED"
    DECLINED = "DECLINED"
    TIMED_OUT = "TIMED_OUT"
    CANCELLED = "CANCELLED"


@dataclass
class Nudge:
    nudge_id: str
    ticket_id: str
    student_id: str
    sent_at: int
    deadline: int
    assignment_id: Optional[str] = None
    outcome: NudgeOutcome = NudgeOutcome.PENDING
    resolved_at: Optional[int] = None


@dataclass
class NudgeTicket:
    ticket_id: str
    teacher_id: str
    created_at: int
    search_deadline: int
    policy: SelectionPolicy = SelectionPolicy.RANDOM
    state: TicketState = TicketState.SEARCHING
    pending_nudge_id: Optional[str] = None
    session_id: Optional[str] = None
    nudged: List[str] = field(default_factory=list)
    resolved_at: Optional[int] = None

    @property
    def terminal(self) -> bool:
        return self.state in TERMINAL_TICKET_STATES

    def transition(self, new_state: TicketState):
        assert new_state in LEGAL_TICKET_TRANSITIONS[self.state], (
            f"illegal ticket transition {self.state} -> {new_state}"
        )
        self.state = new_state


def select_candidate(world, ticket: NudgeTicket, now: int, rng) -> Optional[str]:
    """Pick the next student to offer help to, or None if the pool is empty.

    RANDOM draws uniformly from the nudgable set. MOST_BEHIND picks the
    lowest course progress, breaking ties by the smaller stable hash of
    (student_id, ticket_id).
    """
    pool = nudgable_set(world, NudgableQuery(now=now, exclude=set(ticket.nudged)))
    if not pool:
        return None
    if ticket.policy is SelectionPolicy.MOST_BEHIND:
        return min(pool, key=lambda s: (world.progress_of(s, now), stable_hash64(s, ticket.ticket_id)))
    return rng.choice(sorted(pool))
