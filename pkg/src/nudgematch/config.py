"""Course-level configuration.

All protocol windows are milliseconds on the logical clock. Defaults match
the deployed values; every field is sweepable for experiments and tests.
"""
from dataclasses import dataclass, field, asdict

MS_PER_SECOND = 1_000
MS_PER_MINUTE = 60_000
MS_PER_HOUR = 3_600_000
MS_PER_DAY = 86_400_000


@dataclass
class CourseConfig:
    assignment_ids: list = field(default_factory=list)
    online_window_ms: int = MS_PER_MINUTE
    cooldown_ms: int = MS_PER_DAY
    response_window_ms: int = 30 * MS_PER_SECOND
    search_window_ms: int = 5 * MS_PER_MINUTE
    experiment_fraction: float = 0.35
    experiment_seed: int = 0
    session_idle_timeout_ms: int = MS_PER_HOUR

    def validate(self):
        from .errors import InvalidConfig

        for name in ("online_window_ms", "cooldown_ms", "response_window_ms",
                     "search_window_ms", "session_idle_timeout_ms"):
            if getattr(self, name) <= 0:
                raise InvalidConfig(f"{name} must be > 0")
        if not 0.0 <= self.experiment_fraction <= 1.0:
            raise InvalidConfig("experiment_fraction must be in [0, 1]")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "CourseConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known}).validate()
