"""Append-only event log.

Every state change in the system is an EventRecord; in-memory state is a pure
fold over the record sequence. The on-disk format is one JSON object per line
(UTF-8) with exactly the fields {"seq", "ts", "kind", "payload"} so logs stay
diffable and greppable.
"""
import json
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import CorruptLog

# Event kinds, grouped by subsystem.
COURSE_CONFIGURED = "course_configured"
EXPERIMENT_FRACTION_CHANGED = "experiment_fraction_changed"
HEARTBEAT = "heartbeat"
ASSIGNMENT_COMPLETED = "assignment_completed"
TICKET_INITIATED = "ticket_initiated"
NUDGE_SENT = "nudge_sent"
NUDGE_ACCEPTED = "nudge_accepted"
NUDGE_DECLINED = "nudge_declined"
NUDGE_TIMED_OUT = "nudge_timed_out"
NUDGE_CANCELLED = "nudge_cancelled"
TICKET_MATCHED = "ticket_matched"
TICKET_EXHAUSTED = "ticket_exhausted"
TICKET_CANCELLED = "ticket_cancelled"
SESSION_CREATED = "session_created"
SESSION_EVENT = "session_event"
SESSION_ENDED = "session_ended"
GRATITUDE_RECORDED = "gratitude_recorded"
GRATITUDE_RELEASED = "gratitude_released"
RATING_RECORDED = "rating_recorded"


@dataclass(frozen=True)
class EventRecord:
    seq: int
    ts: int
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "ts": self.ts, "kind": self.kind, "payload": self.payload},
            separators=(",", ":"), sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "EventRecord":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorruptLog(f"unparseable log line: {exc}") from exc
        missing = {"seq", "ts", "kind", "payload"} - set(obj)
        if missing:
            raise CorruptLog(f"log record missing fields: {sorted(missing)}")
        return cls(seq=obj["seq"], ts=obj["ts"], kind=obj["kind"], payload=obj["payload"])


def validate_sequence(events: Iterable[EventRecord]) -> Iterator[EventRecord]:
    """Yield events, enforcing gapless seq starting at 1 and non-decreasing ts."""
    expected_seq = 1
    last_ts = None
    for ev in events:
        if ev.seq != expected_seq:
            raise CorruptLog(f"seq gap: expected {expected_seq}, got {ev.seq}")
        if last_ts is not None and ev.ts < last_ts:
            raise CorruptLog(f"ts regression at seq {ev.seq}: {ev.ts} < {last_ts}")
        expected_seq += 1
        last_ts = ev.ts
        yield ev


def read_log(path) -> list:
    """Read and validate a JSONL event log from disk."""
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(EventRecord.from_json(line))
    return list(validate_sequence(events))


def write_log(path, events: Iterable[EventRecord]):
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(ev.to_json() + "\n")


class LogFileSink:
    """Write-ahead sink: each record is flushed to disk before the command acks."""

    def __init__(self, path):
        self._fh = open(path, "a", encoding="utf-8")

    def __call__(self, event: EventRecord):
        self._fh.write(event.to_json() + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()
