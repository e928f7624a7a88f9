"""Presence tracking: who is online and what they are working on right now.

Students (and volunteer teachers) send periodic heartbeats tagged with an
activity context. A user counts as online when their latest heartbeat is at
most ``online_window_ms`` old.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .errors import MalformedContext, StaleHeartbeat


class ContextKind(str, Enum):
    IDE_ASSIGNMENT = "IDE_ASSIGNMENT"
    FORUM = "FORUM"
    SECTION_PAGE = "SECTION_PAGE"
    OTHER_PAGE = "OTHER_PAGE"


@dataclass(frozen=True)
class ActivityContext:
    kind: ContextKind
    assignment_id: Optional[str] = None

    def __post_init__(self):
        kind = ContextKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is ContextKind.IDE_ASSIGNMENT and not self.assignment_id:
            raise MalformedContext("IDE_ASSIGNMENT context requires assignment_id")
        if kind is not ContextKind.IDE_ASSIGNMENT and self.assignment_id is not None:
            raise MalformedContext(f"assignment_id not allowed for {kind.value}")

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value}
        if self.assignment_id is not None:
            out["assignment_id"] = self.assignment_id
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ActivityContext":
        return cls(kind=ContextKind(data["kind"]), assignment_id=data.get("assignment_id"))


@dataclass
class PresenceRecord:
    student_id: str
    last_heartbeat: int
    context: ActivityContext


class PresenceTable:
    """Latest heartbeat per user. Rejects out-of-order beats; an equal-ts
    duplicate is accepted (at-least-once delivery tolerated)."""

    def __init__(self, online_window_ms: int = 60_000):
        self.online_window_ms = online_window_ms
        self._records: dict = {}

    def check_beat(self, student_id: str, ts: int):
        rec = self._records.get(student_id)
        if rec is not None and ts < rec.last_heartbeat:
            raise StaleHeartbeat(
                f"heartbeat ts {ts} older than stored {rec.last_heartbeat} for {student_id}"
            )

    def apply_beat(self, student_id: str, ts: int, context: ActivityContext) -> PresenceRecord:
        rec = PresenceRecord(student_id=student_id, last_heartbeat=ts, context=context)
        self._records[student_id] = rec
        return rec

    def get(self, student_id: str) -> Optional[PresenceRecord]:
        return self._records.get(student_id)

    def is_online(self, student_id: str, now: int) -> bool:
        rec = self._records.get(student_id)
        return rec is not None and now - rec.last_heartbeat <= self.online_window_ms

    def active_assignment(self, student_id: str, now: int) -> Optional[str]:
        rec = self._records.get(student_id)
        if rec is None or not self.is_online(student_id, now):
            return None
        if rec.context.kind is ContextKind.IDE_ASSIGNMENT:
            return rec.context.assignment_id
        return None

    def known_ids(self):
        return self._records.keys()

    def snapshot(self) -> dict:
        """Deterministic serializable view (used for state hashing)."""
        return {
            sid: {"last_heartbeat": r.last_heartbeat, "context": r.context.to_dict()}
            for sid, r in sorted(self._records.items())
        }
