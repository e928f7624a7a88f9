"""Who may be nudged: experiment bucketing and the nudgable-set filter.

Experiment assignment is a pure hash of (student_id, seed) against the
eligible fraction, so group membership is reproducible anywhere without
storing coin flips. The nudgable set applies every offer precondition:
online, actively on an assignment, outside the offer cooldown, in the
eligible bucket, unoccupied, and not already tried by the asking ticket.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Set

from .hashing import unit_interval


class Group(str, Enum):
    ELIGIBLE = "ELIGIBLE"
    RESTRICTED = "RESTRICTED"


@dataclass(frozen=True)
class ExperimentAssignment:
    student_id: str
    group: Group
    seed: int
    fraction: float


@dataclass
class NudgableQuery:
    now: int
    exclude: Set[str] = field(default_factory=set)
    ignore_group: bool = False


def assign_group(student_id: str, seed: int, fraction: float) -> ExperimentAssignment:
    """Deterministically bucket a student as ELIGIBLE with probability `fraction`."""
    assert 0.0 <= fraction <= 1.0
    eligible = unit_interval(student_id, seed) < fraction
    return ExperimentAssignment(
        student_id=student_id,
        group=Group.ELIGIBLE if eligible else Group.RESTRICTED,
        seed=seed,
        fraction=fraction,
    )


def is_eligible(student_id: str, seed: int, fraction: float) -> bool:
    return assign_group(student_id, seed, fraction).group is Group.ELIGIBLE


def cooldown_active(last_nudge_sent_at: Optional[int], now: int, cooldown_ms: int) -> bool:
    """True while the most recent offer is younger than the cooldown window."""
    return last_nudge_sent_at is not None and last_nudge_sent_at > now - cooldown_ms


def nudgable_set(world, query: NudgableQuery) -> Set[str]:
    """All students currently allowed to receive an offer.

    `world` is anything exposing the read surface of the core aggregate:
    presence table, last nudge per student, pending-nudge and live-session
    indexes, and the active experiment fraction/seed.
    """
    out = set()
    presence = world.presence
    for sid in presence.known_ids():
        if sid in query.exclude:
            continue
        if presence.active_assignment(sid, query.now) is None:
            continue  # also covers not-online
        if cooldown_active(world.last_nudge_sent_at(sid), query.now, world.config.cooldown_ms):
            continue
        if not query.ignore_group and not is_eligible(
            sid, world.config.experiment_seed, world.experiment_fraction
        ):
            continue
        if world.has_live_session(sid):
            continue
        if world.has_pending_nudge(sid):
            continue
        out.add(sid)
    return out
