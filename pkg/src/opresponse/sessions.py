"""In-memory model of recorded operator sessions and extracted feature rows.

A session is a bundle of time-indexed numeric series exported from the
control-system historian, plus metadata about who ran it and which fault
scenario was active. Everything here is immutable after construction so
sessions can be shared freely between threads and processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import Enum
from typing import Mapping, Optional, Sequence


class Group(str, Enum):
    """Support configuration the participant operated under."""

    G1 = "G1"
    G2 = "G2"
    G3 = "G3"
    G4 = "G4"

    @property
    def code(self) -> int:
        return int(self.value[1])

    @property
    def has_procedure_tracking(self) -> bool:
        # On-screen procedure opens are only recorded for G3/G4 setups.
        return self in (Group.G3, Group.G4)


class Scenario(str, Enum):
    """Fault scenario the session ran."""

    S1 = "S1"
    S2 = "S2"
    S3 = "S3"

    @property
    def code(self) -> int:
        return int(self.value[1])


class Performance(str, Enum):
    OPTIMAL = "Optimal"
    GOOD = "Good"
    POOR = "Poor"


DEFAULT_FAULT_START_S = 60.0
DEFAULT_S3_DURATION_S = 1080.0

#: Series name prefix identifying plant alarm indicators ("All" + digits).
ALARM_PREFIX = "All"


def is_alarm_series(name: str) -> bool:
    """True for alarm indicator series such as ``All2_1``."""
    return (
        name.startswith(ALARM_PREFIX)
        and len(name) > len(ALARM_PREFIX)
        and name[len(ALARM_PREFIX)].isdigit()
    )


@dataclass(frozen=True)
class SessionMeta:
    """Identity and timing of one recorded session."""

    participant_id: str
    group: Group
    scenario: Scenario
    fault_start_s: float = DEFAULT_FAULT_START_S
    duration_s: float = DEFAULT_S3_DURATION_S

    def __post_init__(self) -> None:
        if self.fault_start_s < 0:
            raise ValueError(f"fault_start_s must be >= 0, got {self.fault_start_s}")
        if self.duration_s <= self.fault_start_s:
            raise ValueError(
                f"duration_s ({self.duration_s}) must exceed fault_start_s "
                f"({self.fault_start_s})"
            )


Series = tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class SessionLog:
    """One session: metadata plus named (timestamp, value) series.

    Series are stored as tuples of (timestamp_s, value) pairs ordered by
    timestamp. Variable names are opaque keys; the only structural
    assumptions are the documented prefixes (``All`` for alarms).
    """

    meta: SessionMeta
    series: Mapping[str, Series]

    def get(self, name: str) -> Optional[Series]:
        return self.series.get(name)

    def values(self, name: str) -> list[float]:
        return [v for _, v in self.series[name]]

    def timestamps(self, name: str) -> list[float]:
        return [t for t, _ in self.series[name]]

    def alarm_series_names(self) -> list[str]:
        return sorted(n for n in self.series if is_alarm_series(n))


@dataclass(frozen=True)
class Violation:
    """One invariant violation found in a session log."""

    variable: str
    timestamp_s: Optional[float]
    message: str

    def __str__(self) -> str:
        at = f" at t={self.timestamp_s}" if self.timestamp_s is not None else ""
        return f"{self.variable}{at}: {self.message}"


def validate_session(log: SessionLog) -> list[Violation]:
    """Check a session log against its structural invariants.

    Returns an empty list iff the log is well formed. Each violation names
    the offending variable and the first timestamp where the problem shows.
    Pure reporting: never raises for bad data, never mutates the log.
    """
    violations: list[Violation] = []
    for name in sorted(log.series):
        points = log.series[name]
        prev_t: Optional[float] = None
        monotone_reported = False
        alarm_reported = False
        for t, v in points:
            if not math.isfinite(t) or not math.isfinite(v):
                violations.append(Violation(name, t, "non-finite sample"))
                break
            if prev_t is not None and t <= prev_t and not monotone_reported:
                violations.append(
                    Violation(name, t, f"timestamp not strictly increasing (prev {prev_t})")
                )
                monotone_reported = True
            if is_alarm_series(name) and v not in (0.0, 1.0) and not alarm_reported:
                violations.append(
                    Violation(name, t, f"alarm value {v} outside {{0,1}}")
                )
                alarm_reported = True
            prev_t = t
    return violations


@dataclass(frozen=True)
class FeatureVector:
    """Metrics extracted from one session, plus labels.

    Times are seconds from fault start; ``None`` marks a metric that could
    not be observed in the log (for example the alarm never cleared).
    ``accuracy_filled`` is True when the missing-adjustment fill rule
    supplied the 0 stored in ``accuracy_mse``.
    """

    participant_id: str
    group: Group
    scenario: Scenario
    reaction_time_s: Optional[float] = None
    response_time_s: Optional[float] = None
    recovery_time_s: Optional[float] = None
    accuracy_mse: Optional[float] = None
    accuracy_filled: bool = False
    alarms_silenced: int = 0
    acknowledgements: int = 0
    mimics_opened: int = 0
    procedures_opened: Optional[int] = None
    num_alarms: int = 0
    consequence: int = 1
    overall_performance: Optional[Performance] = None
    error: bool = False
    tlx_index: Optional[float] = None
    sart_index: Optional[float] = None
    spam_index: Optional[float] = None
    familiarity: Optional[float] = None
    training: Optional[float] = None

    def __post_init__(self) -> None:
        if self.consequence not in (1, 2, 3, 4, 5):
            raise ValueError(f"consequence rank must be 1..5, got {self.consequence}")
        for nm in ("alarms_silenced", "acknowledgements", "mimics_opened", "num_alarms"):
            if getattr(self, nm) < 0:
                raise ValueError(f"{nm} must be >= 0")
        if self.procedures_opened is not None and self.procedures_opened < 0:
            raise ValueError("procedures_opened must be >= 0")
        for nm in ("reaction_time_s", "response_time_s", "recovery_time_s"):
            val = getattr(self, nm)
            if val is not None and val < 0:
                raise ValueError(f"{nm} must be >= 0, got {val}")


#: Canonical column order for the delimited features file.
FEATURE_COLUMNS: Sequence[str] = tuple(f.name for f in fields(FeatureVector))
