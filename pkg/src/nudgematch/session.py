"""The 1:1 help session: transcript, gratitude and rating.

Only the student may edit code; both participants may chat and run. The
transcript is an append-only list with gapless per-session sequence numbers,
so replays reconstruct identical transcripts.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

from .errors import EditForbidden, NotParticipant


class Author(str, Enum):
    TEACHER = "TEACHER"
    STUDENT = "STUDENT"


class SessionEventKind(str, Enum):
    CHAT = "CHAT"
    CODE_EDIT = "CODE_EDIT"
    CODE_RUN = "CODE_RUN"
    JOIN = "JOIN"
    LEAVE = "LEAVE"


@dataclass
class SessionEvent:
    seq: int
    author: Author
    kind: SessionEventKind
    payload: str = ""


@dataclass
class MediaPrefs:
    video: bool = True
    audio: bool = True
    chat_only: bool = False


@dataclass
class Gratitude:
    thanked: bool
    message: Optional[str] = None
    released_to_teacher: bool = False


@dataclass
class Rating:
    score: int
    comment: Optional[str] = None


@dataclass
class Session:
    session_id: str
    ticket_id: str
    teacher_id: str
    student_id: str
    assignment_id: Optional[str]
    started_at: int
    ended_at: Optional[int] = None
    media_prefs: dict = field(default_factory=dict)
    events: List[SessionEvent] = field(default_factory=list)
    gratitude: Optional[Gratitude] = None
    rating: Optional[Rating] = None
    last_activity_at: int = 0

    def __post_init__(self):
        if not self.last_activity_at:
            self.last_activity_at = self.started_at

    @property
    def live(self) -> bool:
        return self.ended_at is None

    @property
    def duration_ms(self) -> Optional[int]:
        return None if self.ended_at is None else self.ended_at - self.started_at

    def participants(self):
        return (self.teacher_id, self.student_id)

    def author_of(self, user_id: str) -> Author:
        if user_id == self.teacher_id:
            return Author.TEACHER
        if user_id == self.student_id:
            return Author.STUDENT
        raise NotParticipant(f"{user_id} is not in session {self.session_id}")

    def next_seq(self) -> int:
        return len(self.events) + 1


def check_event_permission(author: Author, kind: SessionEventKind):
    if kind is SessionEventKind.CODE_EDIT and author is not Author.STUDENT:
        raise EditForbidden("only the student may edit code")
