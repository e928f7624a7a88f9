"""Deterministic discrete-event harness.

Drives synthetic student/teacher agents through the production core on a
virtual clock: same seed, same event log, bit for bit. Wall time is never
consulted. Besides protocol statistics (`run_sim`), this module generates
ground-truth logs for the analytics layer: a dropout-hazard cohort generator
(`generate_analytics_log`) and a scripted preset reproducing the deployment
summary counts (`table1_preset_log`).
"""
import heapq
import math
import random
from dataclasses import dataclass, field, asdict
from typing import List, Optional

from .config import CourseConfig, MS_PER_DAY, MS_PER_HOUR, MS_PER_MINUTE, MS_PER_SECOND
from .core import Core
from .errors import (
    InvalidConfig,
    NudgeNotPending,
    SessionClosed,
    TeacherBusy,
    TicketTerminal,
)
from .matchmaker import SelectionPolicy, TicketState
from .presence import ActivityContext, ContextKind
from .session import SessionEventKind


@dataclass
class SimConfig:
    n_students: int = 40
    n_teachers: int = 4
    accept_prob: float = 0.24
    response_mode: str = "uniform"        # "instant" or "uniform" over the window
    timeout_prob: float = 0.0             # chance a nudge is simply ignored
    cancel_prob: float = 0.0              # chance a teacher abandons the search
    online_fraction: float = 0.7
    presence_cycle_ms: int = 2 * MS_PER_HOUR
    heartbeat_interval_ms: int = 30 * MS_PER_SECOND
    mean_session_ms: int = 15 * MS_PER_MINUTE
    tickets_per_teacher_hour: float = 2.0
    n_assignments: int = 10
    completions_per_online_hour: float = 0.2
    dropout_base_per_day: float = 0.0
    helped_dropout_multiplier: float = 1.0
    gratitude_prob: float = 0.4
    rating_prob: float = 0.4
    session_chatter: bool = True
    policy: str = "RANDOM"
    seed: int = 0
    horizon_ms: int = 4 * MS_PER_HOUR
    course_overrides: dict = field(default_factory=dict)

    def validate(self) -> "SimConfig":
        for name in ("accept_prob", "timeout_prob", "cancel_prob", "online_fraction",
                     "gratitude_prob", "rating_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidConfig(f"{name} must be in [0, 1]")
        if self.horizon_ms <= 0:
            raise InvalidConfig("horizon_ms must be > 0")
        if self.n_students < 0 or self.n_teachers <= 0:
            raise InvalidConfig("need at least one teacher and no negative students")
        if self.response_mode not in ("instant", "uniform"):
            raise InvalidConfig(f"unknown response_mode {self.response_mode!r}")
        if self.tickets_per_teacher_hour < 0 or self.completions_per_online_hour < 0:
            raise InvalidConfig("rates must be non-negative")
        if self.dropout_base_per_day < 0 or self.helped_dropout_multiplier < 0:
            raise InvalidConfig("hazards must be non-negative")
        return self

    def to_flat(self) -> dict:
        out = asdict(self)
        overrides = out.pop("course_overrides")
        out.update({f"course.{k}": v for k, v in overrides.items()})
        return out

    @classmethod
    def from_flat(cls, data: dict) -> "SimConfig":
        overrides = {}
        plain = {}
        defaults = cls()
        for key, value in data.items():
            if key.startswith("course."):
                overrides[key[len("course."):]] = value
            elif key in cls.__dataclass_fields__:
                default = getattr(defaults, key)
                if isinstance(default, bool):
                    value = value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes")
                elif isinstance(default, int):
                    value = int(float(value))
                elif isinstance(default, float):
                    value = float(value)
                plain[key] = value
        for k, v in list(overrides.items()):
            overrides[k] = float(v) if k == "experiment_fraction" else int(float(v))
        return cls(course_overrides=overrides, **plain).validate()


@dataclass
class SimReport:
    tickets: int
    matched: int
    exhausted: int
    cancelled: int
    mean_nudges_per_match: float
    match_latency_p50_ms: float
    match_latency_p95_ms: float
    events: int
    final_state_hash: str
    event_log_path: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)


def _quantile(sorted_values: List[float], q: float) -> float:
    if not sorted_values:
        return float("nan")
    idx = min(len(sorted_values) - 1, max(0, math.ceil(q * len(sorted_values)) - 1))
    return sorted_values[idx]


class _EventLoop:
    def __init__(self):
        self._heap = []
        self._counter = 0

    def schedule(self, t: int, fn):
        self._counter += 1
        heapq.heappush(self._heap, (int(t), self._counter, fn))

    def run(self, horizon: int):
        while self._heap:
            t, _, fn = heapq.heappop(self._heap)
            if t > horizon:
                break
            fn(t)


class _Student:
    __slots__ = ("sid", "online", "dropped", "next_assignment", "dropout_epoch")

    def __init__(self, sid):
        self.sid = sid
        self.online = False
        self.dropped = False
        self.next_assignment = 0
        self.dropout_epoch = 0


class _Simulation:
    def __init__(self, cfg: SimConfig):
        cfg.validate()
        self.cfg = cfg
        course = CourseConfig(
            assignment_ids=[f"a{i + 1}" for i in range(cfg.n_assignments)],
            experiment_fraction=cfg.course_overrides.get("experiment_fraction", 1.0),
        )
        for key, value in cfg.course_overrides.items():
            setattr(course, key, value)
        self.core = Core(course.validate(), rng_seed=cfg.seed)
        self.rng = random.Random((cfg.seed << 1) ^ 0x9E3779B9)
        self.loop = _EventLoop()
        self.students = {f"s{i + 1}": _Student(f"s{i + 1}") for i in range(cfg.n_students)}
        self.teachers = [f"vt{i + 1}" for i in range(cfg.n_teachers)]

    # ------------------------------------------------------------- students

    def _exp_ms(self, mean_ms: float) -> int:
        return max(1, int(self.rng.expovariate(1.0 / mean_ms)))

    def _assignment_of(self, student: _Student) -> str:
        idx = min(student.next_assignment, self.cfg.n_assignments - 1)
        return f"a{idx + 1}"

    def boot_students(self):
        cfg = self.cfg
        mean_on = cfg.online_fraction * cfg.presence_cycle_ms
        mean_off = (1.0 - cfg.online_fraction) * cfg.presence_cycle_ms
        for student in self.students.values():
            if cfg.online_fraction >= 1.0:
                self.loop.schedule(self.rng.randrange(0, cfg.heartbeat_interval_ms + 1),
                                   self._goes_online(student))
            elif cfg.online_fraction > 0.0:
                first = self._exp_ms(mean_off) if self.rng.random() > cfg.online_fraction else 1
                self.loop.schedule(first, self._goes_online(student))
            if cfg.dropout_base_per_day > 0:
                self._schedule_dropout(student, 0, cfg.dropout_base_per_day)

    def _schedule_dropout(self, student: _Student, now: int, hazard_per_day: float):
        student.dropout_epoch += 1
        epoch = student.dropout_epoch
        at = now + self._exp_ms(MS_PER_DAY / hazard_per_day)

        def fire(t, student=student, epoch=epoch):
            if student.dropout_epoch == epoch and not student.dropped:
                student.dropped = True
                student.online = False

        self.loop.schedule(at, fire)

    def _goes_online(self, student: _Student):
        def fire(t):
            if student.dropped or student.online:
                return
            student.online = True
            self._beat(student, t)
            cfg = self.cfg
            if cfg.online_fraction < 1.0:
                mean_on = max(1.0, cfg.online_fraction * cfg.presence_cycle_ms)
                self.loop.schedule(t + self._exp_ms(mean_on), self._goes_offline(student))
            if cfg.completions_per_online_hour > 0:
                self.loop.schedule(
                    t + self._exp_ms(MS_PER_HOUR / cfg.completions_per_online_hour),
                    self._completes(student))
        return fire

    def _goes_offline(self, student: _Student):
        def fire(t):
            if not student.online:
                return
            student.online = False
            cfg = self.cfg
            mean_off = max(1.0, (1.0 - cfg.online_fraction) * cfg.presence_cycle_ms)
            self.loop.schedule(t + self._exp_ms(mean_off), self._goes_online(student))
        return fire

    def _beat(self, student: _Student, t: int):
        if student.dropped or not student.online:
            return
        self.core.record_heartbeat(student.sid, t, ActivityContext(
            kind=ContextKind.IDE_ASSIGNMENT, assignment_id=self._assignment_of(student)))
        self.loop.schedule(t + self.cfg.heartbeat_interval_ms,
                           lambda t2: self._beat(student, t2))

    def _completes(self, student: _Student):
        def fire(t):
            if student.dropped or not student.online:
                return
            if student.next_assignment < self.cfg.n_assignments:
                self.core.complete_assignment(student.sid, self._assignment_of(student), t)
                student.next_assignment += 1
            self.loop.schedule(
                t + self._exp_ms(MS_PER_HOUR / self.cfg.completions_per_online_hour),
                self._completes(student))
        return fire

    # ------------------------------------------------------------- teachers

    def boot_teachers(self):
        rate = self.cfg.tickets_per_teacher_hour
        if rate <= 0:
            return
        for teacher in self.teachers:
            self.loop.schedule(self._exp_ms(MS_PER_HOUR / rate), self._arrival(teacher))

    def _arrival(self, teacher: str):
        def fire(t):
            try:
                ticket = self.core.initiate_ticket(
                    teacher, t, SelectionPolicy(self.cfg.policy))
            except TeacherBusy:
                ticket = None
            if ticket is not None:
                if self.rng.random() < self.cfg.cancel_prob:
                    cancel_at = t + self.rng.randrange(0, self.core.config.search_window_ms)
                    self.loop.schedule(cancel_at, self._cancel(ticket.ticket_id))
                self._handle_pending(ticket, t)
            self.loop.schedule(
                t + self._exp_ms(MS_PER_HOUR / self.cfg.tickets_per_teacher_hour),
                self._arrival(teacher))
        return fire

    def _cancel(self, ticket_id: str):
        def fire(t):
            try:
                self.core.cancel_ticket(ticket_id, t)
            except TicketTerminal:
                pass
        return fire

    # --------------------------------------------------------------- nudges

    def _handle_pending(self, ticket, now: int):
        nudge_id = ticket.pending_nudge_id
        if nudge_id is None:
            return
        nudge = self.core.nudges[nudge_id]
        self.loop.schedule(nudge.deadline, self._expiry(nudge_id))
        if self.rng.random() < self.cfg.timeout_prob:
            return  # student ignores it; the deadline expiry resolves the nudge
        if self.cfg.response_mode == "instant":
            delay = 0
        else:
            delay = self.rng.randrange(0, self.core.config.response_window_ms)
        accept = self.rng.random() < self.cfg.accept_prob
        self.loop.schedule(nudge.sent_at + delay, self._response(nudge_id, accept))

    def _expiry(self, nudge_id: str):
        def fire(t):
            try:
                ticket = self.core.expire_nudge(nudge_id, t)
            except NudgeNotPending:
                return
            self._after_transition(ticket, t)
        return fire

    def _response(self, nudge_id: str, accept: bool):
        def fire(t):
            try:
                ticket = self.core.respond_nudge(nudge_id, "ACCEPT" if accept else "DECLINE", t)
            except NudgeNotPending:
                return
            self._after_transition(ticket, t)
        return fire

    def _after_transition(self, ticket, now: int):
        if ticket.state is TicketState.NUDGE_PENDING:
            self._handle_pending(ticket, now)
        elif ticket.state is TicketState.MATCHED:
            self._run_session(ticket.session_id, now)

    # -------------------------------------------------------------- sessions

    def _run_session(self, session_id: str, now: int):
        session = self.core.sessions[session_id]
        cfg = self.cfg
        if cfg.helped_dropout_multiplier != 1.0 and cfg.dropout_base_per_day > 0:
            student = self.students.get(session.student_id)
            if student is not None and not student.dropped:
                hazard = cfg.dropout_base_per_day * cfg.helped_dropout_multiplier
                if hazard > 0:
                    self._schedule_dropout(student, now, hazard)
                else:
                    student.dropout_epoch += 1  # helped student never drops
        if cfg.session_chatter:
            chatter = [
                (1, session.student_id, SessionEventKind.JOIN, ""),
                (2, session.teacher_id, SessionEventKind.JOIN, ""),
                (5, session.teacher_id, SessionEventKind.CHAT, "hi, what are you stuck on?"),
                (9, session.student_id, SessionEventKind.CODE_EDIT, "print(x)"),
                (12, session.student_id, SessionEventKind.CODE_RUN, ""),
            ]
            for offset_s, author, kind, payload in chatter:
                self.loop.schedule(now + offset_s * MS_PER_SECOND,
                                   self._session_event(session_id, author, kind, payload))
        end_at = now + self._exp_ms(cfg.mean_session_ms)
        self.loop.schedule(end_at, self._end_session(session_id))

    def _session_event(self, session_id, author, kind, payload):
        def fire(t):
            try:
                self.core.append_session_event(session_id, author, kind, payload, t)
            except SessionClosed:
                pass
        return fire

    def _end_session(self, session_id: str):
        def fire(t):
            session = self.core.sessions[session_id]
            if not session.live:
                return
            self.core.end_session(session_id, t, ended_by=session.teacher_id)
            if self.rng.random() < self.cfg.gratitude_prob:
                self.core.record_gratitude(session_id, thanked=True,
                                           message="thanks a lot!", now=t)
            if self.rng.random() < self.cfg.rating_prob:
                self.core.record_rating(session_id, score=self.rng.randint(3, 5), now=t)
        return fire

    # ------------------------------------------------------------------ run

    def run(self) -> SimReport:
        self.boot_students()
        self.boot_teachers()
        self.loop.run(self.cfg.horizon_ms)
        self.core.run_timers(self.cfg.horizon_ms)

        by_state = {state: 0 for state in TicketState}
        nudges_per_match = []
        latencies = []
        for ticket in self.core.tickets.values():
            by_state[ticket.state] = by_state.get(ticket.state, 0) + 1
            if ticket.state is TicketState.MATCHED:
                nudges_per_match.append(len(ticket.nudged))
                latencies.append(ticket.resolved_at - ticket.created_at)
        latencies.sort()
        matched = by_state[TicketState.MATCHED]
        return SimReport(
            tickets=len(self.core.tickets),
            matched=matched,
            exhausted=by_state[TicketState.EXHAUSTED],
            cancelled=by_state[TicketState.CANCELLED],
            mean_nudges_per_match=(sum(nudges_per_match) / matched) if matched else float("nan"),
            match_latency_p50_ms=_quantile(latencies, 0.50),
            match_latency_p95_ms=_quantile(latencies, 0.95),
            events=len(self.core.log),
            final_state_hash=self.core.state_hash(),
        )


def run_sim(config: SimConfig, log_path: Optional[str] = None, observer=None):
    """Execute one simulation; returns (report, core). Identical config and
    seed produce an identical report and event log. `observer`, if given, is
    called with every committed EventRecord as the run unfolds."""
    sim = _Simulation(config)
    if observer is not None:
        sim.core.observers.append(observer)
    report = sim.run()
    if log_path is not None:
        from .events import write_log
        write_log(log_path, sim.core.log)
        report.event_log_path = str(log_path)
    return report, sim.core


# ------------------------------------------------------------ cohort generator


@dataclass
class AnalyticsLogConfig:
    n_students: int = 400
    n_teachers: int = 30
    n_assignments: int = 20
    course_days: int = 45
    heartbeat_every_ms: int = 6 * MS_PER_HOUR
    assignment_gap_days: tuple = (1.5, 2.5)
    dropout_base_per_day: float = 0.05
    helped_dropout_multiplier: float = 0.5
    n_anchors: int = 500
    anchor_window_days: tuple = (7, 25)
    wave_size: int = 60
    accept_prob: float = 0.9
    unmatched_fraction: float = 0.15
    unmatched_offline_prob: float = 0.7
    unmatched_offline_after_min: int = 5
    session_minutes: int = 20
    experiment_fraction: float = 0.35
    teacher_minute_beats: bool = True
    seed: int = 7

    def validate(self) -> "AnalyticsLogConfig":
        for name in ("dropout_base_per_day", "helped_dropout_multiplier"):
            if getattr(self, name) < 0:
                raise InvalidConfig(f"{name} must be >= 0")
        for name in ("accept_prob", "unmatched_fraction", "unmatched_offline_prob",
                     "experiment_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidConfig(f"{name} must be in [0, 1]")
        return self


def generate_analytics_log(cfg: AnalyticsLogConfig, log_path: Optional[str] = None):
    """Synthesize a course log with known ground truth: a configured dropout
    hazard (multiplied for helped students) and teacher activity patterns
    around matched vs unmatched search attempts. Returns the core whose log
    embeds it all."""
    cfg.validate()
    rng = random.Random(cfg.seed)
    course = CourseConfig(
        assignment_ids=[f"a{i + 1}" for i in range(cfg.n_assignments)],
        experiment_fraction=cfg.experiment_fraction,
        experiment_seed=cfg.seed,
    )
    core = Core(course, rng_seed=cfg.seed)
    loop = _EventLoop()
    horizon = cfg.course_days * MS_PER_DAY

    class Row:
        __slots__ = ("sid", "done", "dropout_at", "helped_at")

        def __init__(self, sid):
            self.sid = sid
            self.done = 0
            self.dropout_at = horizon + 1
            self.helped_at = None

    students = {}
    for i in range(cfg.n_students):
        row = Row(f"s{i + 1}")
        if cfg.dropout_base_per_day > 0:
            row.dropout_at = int(rng.expovariate(cfg.dropout_base_per_day / MS_PER_DAY))
        students[row.sid] = row

    def alive(row, t):
        return t < row.dropout_at

    def working_on(row):
        return f"a{min(row.done, cfg.n_assignments - 1) + 1}"

    def beat(row):
        def fire(t):
            if alive(row, t):
                core.record_heartbeat(row.sid, t, ActivityContext(
                    kind=ContextKind.IDE_ASSIGNMENT, assignment_id=working_on(row)))
                loop.schedule(t + cfg.heartbeat_every_ms, fire)
        return fire

    def completion(row):
        def fire(t):
            if alive(row, t) and row.done < cfg.n_assignments:
                core.complete_assignment(row.sid, working_on(row), t)
                row.done += 1
                gap = rng.uniform(*cfg.assignment_gap_days)
                loop.schedule(t + int(gap * MS_PER_DAY), fire)
        return fire

    for row in students.values():
        loop.schedule(rng.randrange(0, cfg.heartbeat_every_ms), beat(row))
        loop.schedule(int(rng.uniform(*cfg.assignment_gap_days) * MS_PER_DAY), completion(row))

    # anchors: one teacher search attempt each, round-robin over teachers
    lo, hi = cfg.anchor_window_days
    anchor_times = sorted(rng.randrange(lo * MS_PER_DAY, hi * MS_PER_DAY)
                          for _ in range(cfg.n_anchors))
    teachers = [f"vt{i + 1}" for i in range(cfg.n_teachers)]

    def teacher_beats(teacher, anchor, cut_after_min):
        kinds = [ContextKind.FORUM, ContextKind.SECTION_PAGE]
        for m in range(-30, 61):
            if cut_after_min is not None and m >= cut_after_min:
                break
            at = anchor + m * MS_PER_MINUTE

            def fire(t, teacher=teacher, kind=kinds[abs(m) % 2]):
                core.record_heartbeat(teacher, t, ActivityContext(kind=kind))

            loop.schedule(at, fire)

    def anchor_event(anchor, teacher, with_wave):
        def fire(t):
            if with_wave:
                pool = [r for r in students.values() if alive(r, t)]
                wave = rng.sample(pool, min(cfg.wave_size, len(pool)))
                for row in wave:
                    if not core.has_live_session(row.sid):
                        core.record_heartbeat(row.sid, t, ActivityContext(
                            kind=ContextKind.IDE_ASSIGNMENT, assignment_id=working_on(row)))
            def initiate(t2):
                try:
                    ticket = core.initiate_ticket(teacher, t2)
                except TeacherBusy:
                    return
                while ticket.pending_nudge_id is not None:
                    nudge_id = ticket.pending_nudge_id
                    accept = rng.random() < cfg.accept_prob
                    ticket = core.respond_nudge(
                        nudge_id, "ACCEPT" if accept else "DECLINE", t2)
                if ticket.state is TicketState.MATCHED:
                    session = core.sessions[ticket.session_id]
                    row = students[session.student_id]
                    if row.helped_at is None:
                        row.helped_at = t2
                        hazard = cfg.dropout_base_per_day * cfg.helped_dropout_multiplier
                        if row.dropout_at > t2:
                            if hazard > 0:
                                row.dropout_at = t2 + int(
                                    rng.expovariate(hazard / MS_PER_DAY))
                            else:
                                row.dropout_at = horizon + 1
                    end_at = t2 + cfg.session_minutes * MS_PER_MINUTE
                    loop.schedule(end_at, lambda t3: core.end_session(
                        session.session_id, t3, ended_by=session.teacher_id))

            initiate(t)
        return fire

    for i, anchor in enumerate(anchor_times):
        teacher = teachers[i % len(teachers)]
        with_wave = rng.random() >= cfg.unmatched_fraction
        if cfg.teacher_minute_beats:
            cut = None
            if not with_wave and rng.random() < cfg.unmatched_offline_prob:
                cut = cfg.unmatched_offline_after_min
            teacher_beats(teacher, anchor, cut)
        loop.schedule(anchor, anchor_event(anchor, teacher, with_wave))

    loop.run(horizon)
    core.run_timers(horizon)
    if log_path is not None:
        from .events import write_log
        write_log(log_path, core.log)
    return core


# --------------------------------------------------------------- table1 preset


def _teacher_ticket_counts() -> List[int]:
    """102 per-teacher ticket counts summing to 679 with median exactly 4."""
    counts = [1] * 40 + [4] * 12 + [12] * 41 + [11] * 9
    assert len(counts) == 102 and sum(counts) == 679
    assert sorted(counts)[50] == 4 and sorted(counts)[51] == 4
    return counts


def table1_preset_log(log_path: Optional[str] = None):
    """Scripted log whose summary aggregates equal the deployment's Table-like
    headline counts: 102 teachers, 679 tickets, 411 accepted, median 4
    tickets per teacher, 1056 unique students nudged, 375 unique helped."""
    course = CourseConfig(
        assignment_ids=[f"a{i + 1}" for i in range(10)],
        experiment_fraction=1.0,
    )
    core = Core(course, rng_seed=424242)

    counts = _teacher_ticket_counts()
    teacher_for_ticket = []
    for i, n in enumerate(counts):
        teacher_for_ticket.extend([f"vt{i + 1:03d}"] * n)
    # interleave so one teacher's tickets spread out in time
    order = sorted(range(679), key=lambda k: (k % 102, k))
    schedule = [teacher_for_ticket[k] for k in order]

    # ticket plan: 375 matched with a fresh acceptor, then 268 exhausted
    # (decliners only), then 36 matched reusing early acceptors (> 24 h later)
    decliner_plan = [3] * 145 + [2] * 123
    plan = ([("match_fresh", None)] * 375
            + [("exhaust", decliner_plan[i]) for i in range(268)]
            + [("match_reuse", f"h{i + 1:04d}") for i in range(36)])

    next_helper = 1
    next_decliner = 1
    context = ActivityContext(kind=ContextKind.IDE_ASSIGNMENT, assignment_id="a1")

    for idx, (kind, arg) in enumerate(plan):
        teacher = schedule[idx]
        t0 = (idx + 1) * MS_PER_HOUR
        if kind == "match_fresh":
            sid = f"h{next_helper:04d}"
            next_helper += 1
            online = [sid]
            accept_last = True
        elif kind == "match_reuse":
            sid = arg
            online = [sid]
            accept_last = True
        else:
            online = [f"d{next_decliner + j:04d}" for j in range(arg)]
            next_decliner += arg
            accept_last = False
        for s in online:
            core.record_heartbeat(s, t0, context)
        ticket = core.initiate_ticket(teacher, t0 + 1000)
        while ticket.pending_nudge_id is not None:
            last = len(ticket.nudged) == len(online)
            response = "ACCEPT" if (accept_last and last) else "DECLINE"
            ticket = core.respond_nudge(ticket.pending_nudge_id, response, t0 + 2000)
        if ticket.state is TicketState.MATCHED:
            end_at = t0 + 10 * MS_PER_MINUTE
            core.end_session(ticket.session_id, end_at, ended_by=teacher)
            if idx % 3 == 0:
                core.record_gratitude(ticket.session_id, thanked=True, now=end_at)

    if log_path is not None:
        from .events import write_log
        write_log(log_path, core.log)
    return core
