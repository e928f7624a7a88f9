"""Analytics over the event log: progress, retention, matched control groups,
cohort curves around sessions, deployment summary counts, and teacher
activity timelines.

Everything here is a pure function of an immutable log snapshot. `LogView`
indexes the raw records once; the operations never touch live service state,
so recomputation after a replay is bit-identical.
"""
import statistics
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set

import numpy as np

from . import events as ev
from .config import CourseConfig, MS_PER_DAY, MS_PER_MINUTE
from .eligibility import Group, assign_group
from .errors import NoAssignmentsConfigured, NoSessionsWithControls, SessionNotFound
from .presence import ContextKind

TIMELINE_LABELS = ["OFFLINE", "FORUM", "IDE", "SECTION", "HELPING_1_1", "OTHER"]
TIMELINE_OFFSETS = list(range(-30, 61))  # minutes around the anchor

_CONTEXT_LABEL = {
    ContextKind.IDE_ASSIGNMENT.value: "IDE",
    ContextKind.FORUM.value: "FORUM",
    ContextKind.SECTION_PAGE.value: "SECTION",
    ContextKind.OTHER_PAGE.value: "OTHER",
}


@dataclass
class _NudgeRow:
    student_id: str
    sent_at: int
    deadline: int
    resolved_at: Optional[int] = None


@dataclass
class _SessionRow:
    session_id: str
    ticket_id: str
    teacher_id: str
    student_id: str
    assignment_id: Optional[str]
    started_at: int
    ended_at: Optional[int] = None


@dataclass
class _TicketRow:
    ticket_id: str
    teacher_id: str
    created_at: int
    state: str = "OPEN"
    nudged: List[str] = field(default_factory=list)


class LogView:
    """Index of one event log, ready for the analytic queries below."""

    def __init__(self, records: Sequence):
        self.config = CourseConfig()
        self.fraction_changes: List[tuple] = []  # (ts, fraction)
        self.heartbeats: Dict[str, List[tuple]] = {}    # sid -> [(ts, kind, assignment_id)]
        self.heartbeat_ts: Dict[str, List[int]] = {}
        self.completion_ts: Dict[str, List[int]] = {}
        self.last_activity: Dict[str, int] = {}
        self.nudges_by_student: Dict[str, List[_NudgeRow]] = {}
        self.nudge_rows: Dict[str, _NudgeRow] = {}
        self.sessions: Dict[str, _SessionRow] = {}
        self.tickets: Dict[str, _TicketRow] = {}
        self._user_sessions = None
        self._group_cache: dict = {}
        self._ingest(records)

    def _touch(self, user_id: str, ts: int):
        if ts > self.last_activity.get(user_id, -1):
            self.last_activity[user_id] = ts

    def _ingest(self, records):
        for rec in records:
            p = rec.payload
            kind = rec.kind
            if kind == ev.COURSE_CONFIGURED:
                self.config = CourseConfig.from_dict(p)
                self.fraction_changes = [(rec.ts, self.config.experiment_fraction)]
            elif kind == ev.EXPERIMENT_FRACTION_CHANGED:
                self.fraction_changes.append((rec.ts, p["fraction"]))
            elif kind == ev.HEARTBEAT:
                sid = p["student_id"]
                ctx = p["context"]
                self.heartbeats.setdefault(sid, []).append(
                    (p["ts"], ctx["kind"], ctx.get("assignment_id")))
                self.heartbeat_ts.setdefault(sid, []).append(p["ts"])
                self._touch(sid, p["ts"])
            elif kind == ev.ASSIGNMENT_COMPLETED:
                self.completion_ts.setdefault(p["student_id"], []).append(p["ts"])
                self._touch(p["student_id"], p["ts"])
            elif kind == ev.TICKET_INITIATED:
                self.tickets[p["ticket_id"]] = _TicketRow(
                    ticket_id=p["ticket_id"], teacher_id=p["teacher_id"],
                    created_at=p["created_at"])
            elif kind == ev.NUDGE_SENT:
                row = _NudgeRow(student_id=p["student_id"], sent_at=p["sent_at"],
                                deadline=p["deadline"])
                self.nudge_rows[p["nudge_id"]] = row
                self.nudges_by_student.setdefault(p["student_id"], []).append(row)
                self.tickets[p["ticket_id"]].nudged.append(p["student_id"])
            elif kind in (ev.NUDGE_ACCEPTED, ev.NUDGE_DECLINED,
                          ev.NUDGE_TIMED_OUT, ev.NUDGE_CANCELLED):
                self.nudge_rows[p["nudge_id"]].resolved_at = rec.ts
            elif kind == ev.TICKET_MATCHED:
                self.tickets[p["ticket_id"]].state = "MATCHED"
            elif kind == ev.TICKET_EXHAUSTED:
                self.tickets[p["ticket_id"]].state = "EXHAUSTED"
            elif kind == ev.TICKET_CANCELLED:
                self.tickets[p["ticket_id"]].state = "CANCELLED"
            elif kind == ev.SESSION_CREATED:
                self.sessions[p["session_id"]] = _SessionRow(
                    session_id=p["session_id"], ticket_id=p["ticket_id"],
                    teacher_id=p["teacher_id"], student_id=p["student_id"],
                    assignment_id=p.get("assignment_id"), started_at=p["started_at"])
                self._touch(p["student_id"], rec.ts)
                self._touch(p["teacher_id"], rec.ts)
            elif kind == ev.SESSION_EVENT:
                pass
            elif kind == ev.SESSION_ENDED:
                self.sessions[p["session_id"]].ended_at = p["ended_at"]

    # ------------------------------------------------------------ primitives

    def students(self) -> Set[str]:
        return set(self.heartbeats)

    def fraction_at(self, ts: int) -> float:
        fraction = self.config.experiment_fraction
        for change_ts, value in self.fraction_changes:
            if change_ts <= ts:
                fraction = value
        return fraction

    def group_at(self, student_id: str, ts: int) -> Group:
        key = (student_id, self.fraction_at(ts))
        group = self._group_cache.get(key)
        if group is None:
            group = assign_group(student_id, self.config.experiment_seed, key[1]).group
            self._group_cache[key] = group
        return group

    def progress(self, student_id: str, t: int) -> float:
        total = len(self.config.assignment_ids)
        if total == 0:
            raise NoAssignmentsConfigured("course has no assignments")
        done = self.completion_ts.get(student_id, [])
        return bisect_right(done, t) / total

    def is_retained(self, student_id: str, day_ts: int) -> bool:
        return self.last_activity.get(student_id, -1) >= day_ts

    def presence_at(self, student_id: str, t: int) -> Optional[tuple]:
        """Latest heartbeat (ts, kind, assignment_id) at or before t, or None."""
        beats = self.heartbeat_ts.get(student_id)
        if not beats:
            return None
        idx = bisect_right(beats, t) - 1
        if idx < 0:
            return None
        return self.heartbeats[student_id][idx]

    def online_at(self, student_id: str, t: int) -> bool:
        beat = self.presence_at(student_id, t)
        return beat is not None and t - beat[0] <= self.config.online_window_ms

    def assignment_at(self, student_id: str, t: int) -> Optional[str]:
        beat = self.presence_at(student_id, t)
        if beat is None or t - beat[0] > self.config.online_window_ms:
            return None
        ts, kind, assignment_id = beat
        return assignment_id if kind == ContextKind.IDE_ASSIGNMENT.value else None

    def cooldown_active_at(self, student_id: str, t: int) -> bool:
        return any(t - self.config.cooldown_ms < row.sent_at <= t
                   for row in self.nudges_by_student.get(student_id, []))

    def pending_nudge_at(self, student_id: str, t: int) -> bool:
        for row in self.nudges_by_student.get(student_id, []):
            end = row.resolved_at if row.resolved_at is not None else row.deadline
            if row.sent_at <= t < end:
                return True
        return False

    def _sessions_of(self, user_id: str):
        if self._user_sessions is None:
            index: Dict[str, list] = {}
            for s in self.sessions.values():
                index.setdefault(s.teacher_id, []).append(s)
                index.setdefault(s.student_id, []).append(s)
            self._user_sessions = index
        return self._user_sessions.get(user_id, ())

    def in_session_at(self, user_id: str, t: int) -> bool:
        for s in self._sessions_of(user_id):
            if s.started_at <= t and (s.ended_at is None or s.ended_at > t):
                return True
        return False

    # ---------------------------------------------------------- control group


@dataclass
class ControlGroup:
    session_id: str
    anchor_ts: int
    members: Set[str]


def control_group(view: LogView, session_id: str) -> ControlGroup:
    """Counterfactual cohort for one session, built at the accept instant:
    restricted-group students who were nudgable apart from their bucket,
    working on the same assignment, within one percentage point of the helped
    student's course progress."""
    session = view.sessions.get(session_id)
    if session is None:
        raise SessionNotFound(session_id)
    anchor = session.started_at
    helped = session.student_id
    helped_progress = view.progress(helped, anchor)
    members = set()
    for sid in view.students():
        if sid == helped or sid == session.teacher_id:
            continue
        if view.group_at(sid, anchor) is not Group.RESTRICTED:
            continue
        assignment = view.assignment_at(sid, anchor)
        if assignment is None or assignment != session.assignment_id:
            continue
        if view.cooldown_active_at(sid, anchor):
            continue
        if view.pending_nudge_at(sid, anchor):
            continue
        if view.in_session_at(sid, anchor):
            continue
        if abs(view.progress(sid, anchor) - helped_progress) > 0.01 + 1e-12:
            continue
        members.add(sid)
    return ControlGroup(session_id=session_id, anchor_ts=anchor, members=members)


# ------------------------------------------------------------- cohort curves


@dataclass
class CohortCurves:
    offsets: np.ndarray            # day offsets relative to the accept instant
    helped_progress: np.ndarray
    control_progress: np.ndarray
    helped_dropout: np.ndarray
    control_dropout: np.ndarray
    helped_progress_se: np.ndarray
    control_progress_se: np.ndarray
    helped_dropout_se: np.ndarray
    control_dropout_se: np.ndarray
    n_helped: int
    n_control: int
    skipped_sessions: int


def cohort_curves(view: LogView, session_ids: Optional[Sequence[str]] = None,
                  day_offsets: Sequence[int] = range(-3, 16)) -> CohortCurves:
    if session_ids is None:
        session_ids = sorted(view.sessions)
    helped_points = []   # (student_id, anchor, weight)
    control_points = []  # members pooled across sessions, weighted 1/|set|
    skipped = 0
    for sid in session_ids:
        group = control_group(view, sid)
        if not group.members:
            skipped += 1
            continue
        session = view.sessions[sid]
        helped_points.append((session.student_id, group.anchor_ts, 1.0))
        # each matched set carries the same total weight as its helped student,
        # so the control composition mirrors the helped composition
        weight = 1.0 / len(group.members)
        control_points.extend((m, group.anchor_ts, weight) for m in sorted(group.members))
    if not helped_points:
        raise NoSessionsWithControls("no session has a nonempty control group")

    offsets = np.asarray(list(day_offsets), dtype=int)

    def series(points):
        progress = np.empty((len(points), len(offsets)))
        dropout = np.empty((len(points), len(offsets)))
        for i, (student, anchor, _) in enumerate(points):
            for j, d in enumerate(offsets):
                t = anchor + int(d) * MS_PER_DAY
                progress[i, j] = view.progress(student, t)
                dropout[i, j] = 0.0 if view.is_retained(student, t) else 1.0
        weights = np.asarray([w for _, _, w in points])
        return progress, dropout, weights

    hp, hd, hw = series(helped_points)
    cp, cd, cw = series(control_points)
    # A student pooled into several sessions contributes correlated samples, so
    # standard errors are computed against the unique-student count.
    n_helped_unique = max(1, len({s for s, _, _ in helped_points}))
    n_control_unique = max(1, len({s for s, _, _ in control_points}))

    def wmean(mat, weights):
        return np.average(mat, axis=0, weights=weights)

    def dropout_se(mat, weights, n_unique):
        p = wmean(mat, weights)
        return np.sqrt(p * (1 - p) / n_unique)

    def progress_se(mat, n_unique):
        if mat.shape[0] < 2:
            return np.zeros(mat.shape[1])
        return mat.std(axis=0, ddof=1) / np.sqrt(n_unique)

    return CohortCurves(
        offsets=offsets,
        helped_progress=wmean(hp, hw),
        control_progress=wmean(cp, cw),
        helped_dropout=wmean(hd, hw),
        control_dropout=wmean(cd, cw),
        helped_progress_se=progress_se(hp, n_helped_unique),
        control_progress_se=progress_se(cp, n_control_unique),
        helped_dropout_se=dropout_se(hd, hw, n_helped_unique),
        control_dropout_se=dropout_se(cd, cw, n_control_unique),
        n_helped=len(helped_points),
        n_control=len(control_points),
        skipped_sessions=skipped,
    )


# ---------------------------------------------------------------- aggregates


def table1_aggregates(view: LogView) -> dict:
    """Deployment summary counts: teachers who tried the feature, tickets
    initiated/accepted, median tickets per teacher, unique students nudged
    and helped."""
    per_teacher: Dict[str, int] = {}
    for ticket in view.tickets.values():
        per_teacher[ticket.teacher_id] = per_teacher.get(ticket.teacher_id, 0) + 1
    nudged = set()
    for ticket in view.tickets.values():
        nudged.update(ticket.nudged)
    counts = sorted(per_teacher.values())
    median = statistics.median(counts) if counts else 0
    if median == int(median):
        median = int(median)
    return {
        "teachers_tried": len(per_teacher),
        "tickets_initiated": len(view.tickets),
        "tickets_accepted": sum(1 for t in view.tickets.values() if t.state == "MATCHED"),
        "median_tickets_per_teacher": median,
        "unique_students_nudged": len(nudged),
        "unique_students_helped": len({s.student_id for s in view.sessions.values()}),
    }


# ----------------------------------------------------------------- timelines


@dataclass
class ActivityTimeline:
    teacher_id: str
    anchor_ts: int
    offsets: List[int]
    labels: List[str]


def _label_at(view: LogView, user_id: str, t: int) -> str:
    if view.in_session_at(user_id, t):
        return "HELPING_1_1"
    beat = view.presence_at(user_id, t)
    if beat is None or t - beat[0] > view.config.online_window_ms:
        return "OFFLINE"
    return _CONTEXT_LABEL[beat[1]]


def activity_timeline(view: LogView, teacher_id: str, anchor_ts: int) -> ActivityTimeline:
    labels = [_label_at(view, teacher_id, anchor_ts + m * MS_PER_MINUTE)
              for m in TIMELINE_OFFSETS]
    return ActivityTimeline(teacher_id=teacher_id, anchor_ts=anchor_ts,
                            offsets=list(TIMELINE_OFFSETS), labels=labels)


@dataclass
class TimelineComparison:
    labels: List[str]
    offsets: List[int]
    matched: np.ndarray      # label x minute proportions
    unmatched: np.ndarray
    n_matched: int
    n_unmatched: int


def matched_vs_unmatched(view: LogView) -> TimelineComparison:
    """Per-minute activity-label proportions for teachers behind matched vs
    exhausted tickets, anchored at ticket initiation."""
    groups = {"MATCHED": [], "EXHAUSTED": []}
    for ticket in view.tickets.values():
        if ticket.state in groups:
            groups[ticket.state].append(ticket)

    def matrix(tickets):
        mat = np.zeros((len(TIMELINE_LABELS), len(TIMELINE_OFFSETS)))
        if not tickets:
            return mat
        index = {label: i for i, label in enumerate(TIMELINE_LABELS)}
        for ticket in tickets:
            timeline = activity_timeline(view, ticket.teacher_id, ticket.created_at)
            for j, label in enumerate(timeline.labels):
                mat[index[label], j] += 1
        return mat / len(tickets)

    return TimelineComparison(
        labels=list(TIMELINE_LABELS),
        offsets=list(TIMELINE_OFFSETS),
        matched=matrix(groups["MATCHED"]),
        unmatched=matrix(groups["EXHAUSTED"]),
        n_matched=len(groups["MATCHED"]),
        n_unmatched=len(groups["EXHAUSTED"]),
    )
