import pytest

from nudgematch.config import CourseConfig
from nudgematch.core import Core
from nudgematch.presence import ActivityContext, ContextKind


def ide(assignment_id="a1"):
    return ActivityContext(kind=ContextKind.IDE_ASSIGNMENT, assignment_id=assignment_id)


def forum():
    return ActivityContext(kind=ContextKind.FORUM)


def make_core(**overrides) -> Core:
    defaults = dict(
        assignment_ids=["a1", "a2", "a3", "a4", "a5"],
        experiment_fraction=1.0,   # most protocol tests want everyone nudgable
        experiment_seed=0,
    )
    defaults.update(overrides)
    return Core(CourseConfig(**defaults), rng_seed=0)


@pytest.fixture
def core():
    return make_core()
