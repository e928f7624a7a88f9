import random

import pytest
from hypothesis import given, settings, strategies as st

from nudgematch.config import MS_PER_DAY, MS_PER_HOUR
from nudgematch.eligibility import (
    Group,
    NudgableQuery,
    assign_group,
    cooldown_active,
    nudgable_set,
)
from nudgematch.hashing import unit_interval

from conftest import forum, ide, make_core


def test_fraction_zero_and_one():
    for i in range(200):
        assert assign_group(f"s{i}", 1, 0.0).group is Group.RESTRICTED
        assert assign_group(f"s{i}", 1, 1.0).group is Group.ELIGIBLE


def test_assignment_is_deterministic_across_calls():
    a = assign_group("student-42", 12345, 0.35)
    b = assign_group("student-42", 12345, 0.35)
    assert a == b


def test_fraction_035_concentration():
    # binomial: 10,000 ids at p=0.35 should land within [0.33, 0.37]
    n = 10_000
    eligible = sum(assign_group(f"id{i}", 7, 0.35).group is Group.ELIGIBLE
                   for i in range(n))
    assert 0.33 <= eligible / n <= 0.37


def test_seed_change_shuffles_membership_but_keeps_fraction():
    ids = [f"id{i}" for i in range(5000)]
    g1 = {i for i in ids if assign_group(i, 1, 0.35).group is Group.ELIGIBLE}
    g2 = {i for i in ids if assign_group(i, 2, 0.35).group is Group.ELIGIBLE}
    assert g1 != g2
    assert 0.32 <= len(g2) / len(ids) <= 0.38
    overlap = len(g1 & g2) / len(ids)
    assert 0.05 <= overlap <= 0.25  # ~0.35^2 under independence


def test_cooldown_boundaries():
    now = 100 * MS_PER_DAY
    assert cooldown_active(now - int(23.9 * MS_PER_HOUR), now, MS_PER_DAY)
    assert not cooldown_active(now - int(24.1 * MS_PER_HOUR), now, MS_PER_DAY)
    assert not cooldown_active(now - 24 * MS_PER_HOUR, now, MS_PER_DAY)
    assert not cooldown_active(None, now, MS_PER_DAY)


def test_nudgable_three_record_scenario():
    core = make_core(experiment_fraction=1.0)
    now = 30 * MS_PER_HOUR
    core.record_heartbeat("s1", now - 1000, ide("a1"))
    core.record_heartbeat("s2", now - 1000, forum())
    core.record_heartbeat("s3", now - 2 * MS_PER_HOUR, ide("a1"))
    core._last_nudge_sent["s3"] = now - MS_PER_HOUR  # nudged an hour ago
    core.record_heartbeat("s3", now - 1000, ide("a1"))
    assert core.nudgable(NudgableQuery(now=now)) == {"s1"}


def test_ignore_group_disables_group_filter():
    core = make_core(experiment_fraction=0.0)  # everyone restricted
    now = 10_000
    core.record_heartbeat("s1", now, ide("a1"))
    assert core.nudgable(NudgableQuery(now=now)) == set()
    assert core.nudgable(NudgableQuery(now=now, ignore_group=True)) == {"s1"}


def test_no_students_online_gives_empty_set(core):
    assert core.nudgable(NudgableQuery(now=1_000_000)) == set()


# ---------------------------------------------------------------------------
# randomized-world oracle: nudgable_set must equal an independent brute-force
# filter over the raw per-student records


class _World:
    """Raw student records plus the read surface nudgable_set needs."""

    def __init__(self, config, students, now):
        from nudgematch.presence import PresenceTable

        self.config = config
        self.experiment_fraction = config.experiment_fraction
        self.now = now
        self.students = students
        self.presence = PresenceTable(config.online_window_ms)
        for s in students:
            if s["beat_ts"] is not None:
                self.presence.apply_beat(s["id"], s["beat_ts"], s["context"])

    def last_nudge_sent_at(self, sid):
        return self._by_id(sid)["last_nudge"]

    def has_pending_nudge(self, sid):
        return self._by_id(sid)["pending"]

    def has_live_session(self, sid):
        return self._by_id(sid)["in_session"]

    def _by_id(self, sid):
        return next(s for s in self.students if s["id"] == sid)


def _oracle(world, query):
    """Independent full-scan over raw records applying filters (a)-(g)."""
    from nudgematch.presence import ContextKind

    out = set()
    cfg = world.config
    for s in world.students:
        if s["beat_ts"] is None:
            continue
        online = query.now - s["beat_ts"] <= cfg.online_window_ms
        on_ide = s["context"].kind is ContextKind.IDE_ASSIGNMENT
        cooled = (s["last_nudge"] is not None
                  and s["last_nudge"] > query.now - cfg.cooldown_ms)
        in_group = unit_interval(s["id"], cfg.experiment_seed) < cfg.experiment_fraction
        if (online and on_ide and not cooled
                and (query.ignore_group or in_group)
                and not s["in_session"] and not s["pending"]
                and s["id"] not in query.exclude):
            out.add(s["id"])
    return out


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**9), n=st.integers(0, 200),
       ignore_group=st.booleans())
def test_nudgable_matches_bruteforce_oracle(seed, n, ignore_group):
    from nudgematch.config import CourseConfig

    rng = random.Random(seed)
    config = CourseConfig(assignment_ids=["a1", "a2"],
                          experiment_fraction=rng.choice([0.0, 0.35, 0.7, 1.0]),
                          experiment_seed=rng.randrange(1000))
    now = 40 * MS_PER_HOUR
    students = []
    for i in range(n):
        beat_age = rng.choice([None, 1000, 30_000, 59_999, 60_000, 60_001, MS_PER_HOUR])
        students.append({
            "id": f"s{i}",
            "beat_ts": None if beat_age is None else now - beat_age,
            "context": rng.choice([ide("a1"), ide("a2"), forum()]),
            "last_nudge": rng.choice([None, now - MS_PER_HOUR, now - 25 * MS_PER_HOUR]),
            "pending": rng.random() < 0.1,
            "in_session": rng.random() < 0.1,
        })
    exclude = {s["id"] for s in students if rng.random() < 0.1}
    world = _World(config, students, now)
    query = NudgableQuery(now=now, exclude=exclude, ignore_group=ignore_group)
    assert nudgable_set(world, query) == _oracle(world, query)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**9), n=st.integers(1, 100))
def test_group_filter_only_narrows(seed, n):
    from nudgematch.config import CourseConfig

    rng = random.Random(seed)
    config = CourseConfig(assignment_ids=["a1"], experiment_fraction=0.35,
                          experiment_seed=rng.randrange(1000))
    now = 40 * MS_PER_HOUR
    students = [{
        "id": f"s{i}",
        "beat_ts": now - rng.choice([1000, 70_000]),
        "context": rng.choice([ide("a1"), forum()]),
        "last_nudge": None,
        "pending": False,
        "in_session": False,
    } for i in range(n)]
    world = _World(config, students, now)
    with_group = nudgable_set(world, NudgableQuery(now=now))
    without_group = nudgable_set(world, NudgableQuery(now=now, ignore_group=True))
    assert with_group <= without_group
