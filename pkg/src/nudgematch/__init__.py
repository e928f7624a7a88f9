"""Event-sourced 1:1 help matchmaking: presence, eligibility, nudge tickets,
sessions, analytics, and a deterministic simulation harness."""

from .analytics import LogView, cohort_curves, control_group, table1_aggregates
from .checks import verify_protocol_invariants
from .config import CourseConfig
from .core import Core
from .eligibility import Group, NudgableQuery, assign_group, nudgable_set
from .events import EventRecord, read_log, write_log
from .matchmaker import NudgeOutcome, SelectionPolicy, TicketState
from .presence import ActivityContext, ContextKind
from .simulator import AnalyticsLogConfig, SimConfig, generate_analytics_log, run_sim

__all__ = [
    "ActivityContext",
    "AnalyticsLogConfig",
    "assign_group",
    "cohort_curves",
    "ContextKind",
    "control_group",
    "Core",
    "CourseConfig",
    "EventRecord",
    "generate_analytics_log",
    "Group",
    "LogView",
    "NudgableQuery",
    "nudgable_set",
    "NudgeOutcome",
    "read_log",
    "run_sim",
    "SelectionPolicy",
    "SimConfig",
    "table1_aggregates",
    "TicketState",
    "verify_protocol_invariants",
    "write_log",
]

__version__ = "0.1.0"
