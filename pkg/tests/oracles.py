"""Independent brute-force re-derivations used to check the analytics module.

Everything here works straight off raw EventRecords: no LogView, no shared
indexes, so agreement with the library is meaningful evidence rather than
the same code run twice.
"""
from bisect import bisect_right

from nudgematch import events as ev
from nudgematch.config import CourseConfig
from nudgematch.eligibility import Group, assign_group
from nudgematch.presence import ContextKind


def control_group_oracle(records, session_id):
    """Recompute one session's matched control set by scanning the raw log."""
    config = CourseConfig()
    fraction_changes = []
    beats = {}        # sid -> [(ts, kind, assignment_id)]
    completions = {}  # sid -> [ts]
    nudges = {}       # sid -> [(sent_at, deadline, resolved_at)]
    nudge_meta = {}   # nudge_id -> (sid, index)
    sessions = {}     # session_id -> dict
    for rec in records:
        p = rec.payload
        if rec.kind == ev.COURSE_CONFIGURED:
            config = CourseConfig.from_dict(p)
            fraction_changes = [(rec.ts, config.experiment_fraction)]
        elif rec.kind == ev.EXPERIMENT_FRACTION_CHANGED:
            fraction_changes.append((rec.ts, p["fraction"]))
        elif rec.kind == ev.HEARTBEAT:
            beats.setdefault(p["student_id"], []).append(
                (p["ts"], p["context"]["kind"], p["context"].get("assignment_id")))
        elif rec.kind == ev.ASSIGNMENT_COMPLETED:
            completions.setdefault(p["student_id"], []).append(p["ts"])
        elif rec.kind == ev.NUDGE_SENT:
            rows = nudges.setdefault(p["student_id"], [])
            nudge_meta[p["nudge_id"]] = (p["student_id"], len(rows))
            rows.append([p["sent_at"], p["deadline"], None])
        elif rec.kind in (ev.NUDGE_ACCEPTED, ev.NUDGE_DECLINED,
                          ev.NUDGE_TIMED_OUT, ev.NUDGE_CANCELLED):
            sid, idx = nudge_meta[p["nudge_id"]]
            nudges[sid][idx][2] = rec.ts
        elif rec.kind == ev.SESSION_CREATED:
            sessions[p["session_id"]] = {
                "teacher_id": p["teacher_id"], "student_id": p["student_id"],
                "assignment_id": p.get("assignment_id"),
                "started_at": p["started_at"], "ended_at": None,
            }
        elif rec.kind == ev.SESSION_ENDED:
            sessions[p["session_id"]]["ended_at"] = p["ended_at"]

    target = sessions[session_id]
    anchor = target["started_at"]
    helped = target["student_id"]
    total = len(config.assignment_ids)

    fraction = config.experiment_fraction
    for ts, value in fraction_changes:
        if ts <= anchor:
            fraction = value

    def progress(sid):
        return bisect_right(sorted(completions.get(sid, [])), anchor) / total

    helped_progress = progress(helped)
    members = set()
    for sid in beats:
        if sid in (helped, target["teacher_id"]):
            continue
        if assign_group(sid, config.experiment_seed, fraction).group is not Group.RESTRICTED:
            continue
        latest = None
        for beat in beats[sid]:
            if beat[0] <= anchor:
                latest = beat
        if latest is None or anchor - latest[0] > config.online_window_ms:
            continue
        if latest[1] != ContextKind.IDE_ASSIGNMENT.value:
            continue
        if latest[2] != target["assignment_id"]:
            continue
        if any(anchor - config.cooldown_ms < sent <= anchor
               for sent, _, _ in nudges.get(sid, [])):
            continue
        if any(sent <= anchor < (resolved if resolved is not None else deadline)
               for sent, deadline, resolved in nudges.get(sid, [])):
            continue
        if any(s["started_at"] <= anchor
               and (s["ended_at"] is None or s["ended_at"] > anchor)
               and sid in (s["teacher_id"], s["student_id"])
               for s in sessions.values()):
            continue
        if abs(progress(sid) - helped_progress) > 0.01 + 1e-12:
            continue
        members.add(sid)
    return members


def timeline_label_oracle(records, user_id, t):
    """Recompute one activity-timeline label by scanning the raw log."""
    config = CourseConfig()
    latest = None
    in_session = False
    for rec in records:
        p = rec.payload
        if rec.kind == ev.COURSE_CONFIGURED:
            config = CourseConfig.from_dict(p)
        elif rec.kind == ev.HEARTBEAT and p["student_id"] == user_id and p["ts"] <= t:
            if latest is None or p["ts"] >= latest[0]:
                latest = (p["ts"], p["context"]["kind"])
        elif rec.kind == ev.SESSION_CREATED and user_id in (p["teacher_id"], p["student_id"]):
            if p["started_at"] <= t:
                in_session = True
                open_session = p["session_id"]
        elif rec.kind == ev.SESSION_ENDED and in_session and p["session_id"] == open_session:
            if p["ended_at"] <= t:
                in_session = False
    if in_session:
        return "HELPING_1_1"
    if latest is None or t - latest[0] > config.online_window_ms:
        return "OFFLINE"
    return {
        ContextKind.IDE_ASSIGNMENT.value: "IDE",
        ContextKind.FORUM.value: "FORUM",
        ContextKind.SECTION_PAGE.value: "SECTION",
        ContextKind.OTHER_PAGE.value: "OTHER",
    }[latest[1]]
