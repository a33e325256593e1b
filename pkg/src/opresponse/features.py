"""Metric extraction rules turning a session log into a feature row.

Twelve metrics per session: three times (reaction, response, recovery),
accuracy, interaction counts, alarm count, consequence rank, the overall
performance class and the binary error label. Scenario determines which
raw variables feed each rule; the variable map in ExtractionConfig lets a
different plant rebind tag names without code changes.

Timing conventions used throughout:

* All time metrics are reported in seconds from fault start. Events that
  occur before the fault starts are ignored: there is nothing to react to
  yet, and counting them would produce negative times.
* "Transition to manual" means the switch series changes to a nonzero
  value (a series already nonzero at its first sample counts as switching
  at that sample).
* "Adjustment" / "activity" means any value change of the action series.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigError, ContractError, ExtractionError
from .sessions import (
    FeatureVector,
    Group,
    Performance,
    Scenario,
    Series,
    SessionLog,
)


@dataclass(frozen=True)
class VariableMap:
    """Raw historian tag names feeding each metric rule, per scenario."""

    reaction_switch: Mapping[str, str] = field(
        default_factory=lambda: {"S1": "MNitsel_1", "S2": "MNitsel_1", "S3": "REC3WMO_1"}
    )
    response_action: Mapping[str, str] = field(
        default_factory=lambda: {"S1": "MmanNit_1", "S2": "Nitsel_1", "S3": "Toutrec2c_1"}
    )
    accuracy_target: Mapping[str, str] = field(
        default_factory=lambda: {"S1": "FN2serb1O_1", "S2": "MWpopOld_1", "S3": "Toutrec2c_1"}
    )
    tank_pressure: str = "PSERB_1"
    emergency_stop: str = "emmerO_1"
    pressure_alarm: str = "All2_1"
    reactor_temp: str = "TMAXREATORE_1"
    mimics: str = "intop"
    silenced: str = "sAll"
    acknowledged: str = "AckAll"
    procedures: str = "proclis_1"


@dataclass(frozen=True)
class ExtractionConfig:
    """Thresholds and targets for the metric rules.

    procedure_target_mean holds the midpoint of the range the intervention
    procedure prescribes for the adjusted variable, per scenario; it has no
    sensible default and must come from the plant's procedure sheet.
    """

    procedure_target_mean: Mapping[str, Optional[float]] = field(
        default_factory=lambda: {"S1": None, "S2": None, "S3": None}
    )
    impurity_low: float = 0.975
    impurity_high: float = 0.980
    shutdown_level: float = 0.970
    psv01_level: float = 0.980
    reactor_overheat_level: float = 400.0
    s3_optimal_survival_s: float = 900.0
    s3_good_survival_s: float = 850.0
    spike_multiplier: float = 5.0
    cohort_mode: str = "population"
    variables: VariableMap = field(default_factory=VariableMap)

    def __post_init__(self) -> None:
        if not self.impurity_low < self.impurity_high:
            raise ConfigError(
                f"impurity_low ({self.impurity_low}) must be below "
                f"impurity_high ({self.impurity_high})"
            )
        if not self.s3_good_survival_s < self.s3_optimal_survival_s:
            raise ConfigError("s3_good_survival_s must be below s3_optimal_survival_s")
        if self.cohort_mode not in ("population", "per-group"):
            raise ConfigError(f"unknown cohort_mode {self.cohort_mode!r}")

    def target_mean(self, scenario: Scenario) -> float:
        value = self.procedure_target_mean.get(scenario.value)
        if value is None:
            raise ConfigError(
                f"procedure_target_mean is unset for scenario {scenario.value}"
            )
        return float(value)


def config_to_json(cfg: ExtractionConfig) -> str:
    payload = dataclasses.asdict(cfg)
    return json.dumps(payload, indent=2, sort_keys=True)


def config_from_json(text: str) -> ExtractionConfig:
    payload = json.loads(text)
    variables = payload.pop("variables", None)
    kwargs = dict(payload)
    if variables is not None:
        kwargs["variables"] = VariableMap(**variables)
    try:
        return ExtractionConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad extraction config: {exc}")


def load_config(path: str | Path) -> ExtractionConfig:
    return config_from_json(Path(path).read_text())


# ---------------------------------------------------------------------------
# event primitives


def _require(log: SessionLog, name: str) -> Series:
    series = log.get(name)
    if series is None:
        raise ExtractionError(name)
    return series


def first_switch_on(series: Series, t_min: float) -> Optional[float]:
    """Timestamp where the series first becomes nonzero at or after t_min."""
    prev = None
    for t, v in series:
        became_on = v != 0.0 and (prev is None or prev == 0.0)
        if became_on and t >= t_min:
            return t
        prev = v
    return None


def change_times(series: Series, t_min: float) -> list[float]:
    """Timestamps of value changes at or after t_min."""
    out = []
    prev = None
    for t, v in series:
        if prev is not None and v != prev and t >= t_min:
            out.append(t)
        prev = v
    return out


def last_clear_time(series: Series, t_min: float) -> Optional[float]:
    """Timestamp where the series last returns to zero at or after t_min."""
    last = None
    prev = None
    for t, v in series:
        if prev is not None and prev != 0.0 and v == 0.0 and t >= t_min:
            last = t
        prev = v
    return last


def count_events(series: Series) -> int:
    """Count discrete events over the whole series.

    An event is any change to a nonzero value; a series that starts
    nonzero counts its initial state as one event. Covers both 0/1 pulse
    trains (rising edges) and enumerated-state series such as the open
    mimic id, where each hop to a new nonzero state is one action.
    """
    count = 0
    prev = None
    for _, v in series:
        if prev is None:
            if v != 0.0:
                count += 1
        elif v != prev and v != 0.0:
            count += 1
        prev = v
    return count


# ---------------------------------------------------------------------------
# Table-of-metrics rules


def reaction_time(log: SessionLog, cfg: ExtractionConfig) -> Optional[float]:
    """Seconds from fault start to the first auto-to-manual takeover."""
    name = cfg.variables.reaction_switch[log.meta.scenario.value]
    series = _require(log, name)
    t = first_switch_on(series, log.meta.fault_start_s)
    return None if t is None else t - log.meta.fault_start_s


def detect_spike_onset(series: Series, fault_start_s: float, multiplier: float) -> Optional[float]:
    """First post-fault sample whose upward jump dwarfs the pre-fault noise.

    The noise scale is the median absolute forward difference over the
    pre-fault window; a flat pre-fault series makes any post-fault increase
    a spike. Returns the timestamp of the first offending sample.
    """
    ts = [t for t, _ in series]
    vs = [v for _, v in series]
    pre = [abs(vs[i + 1] - vs[i]) for i in range(len(vs) - 1) if ts[i + 1] <= fault_start_s]
    baseline = float(np.median(pre)) if pre else 0.0
    for i in range(len(vs) - 1):
        if ts[i + 1] < fault_start_s:
            continue
        jump = vs[i + 1] - vs[i]
        if jump > 0 and jump > multiplier * baseline:
            return ts[i + 1]
    return None


def response_time(log: SessionLog, cfg: ExtractionConfig) -> Optional[float]:
    """Scenario-specific corrective-action time, in seconds from fault start.

    First scenario: last adjustment of the manual valve scale. Second:
    the switch to the backup supply (absent when never switched, which the
    error label picks up). Third: survival time, the last activity on the
    cooling-temperature scale before its upward spike; with no spike the
    operator survived to the end of the task.
    """
    meta = log.meta
    name = cfg.variables.response_action[meta.scenario.value]
    series = _require(log, name)
    if meta.scenario is Scenario.S1:
        changes = change_times(series, meta.fault_start_s)
        return changes[-1] - meta.fault_start_s if changes else None
    if meta.scenario is Scenario.S2:
        t = first_switch_on(series, meta.fault_start_s)
        return None if t is None else t - meta.fault_start_s
    onset = detect_spike_onset(series, meta.fault_start_s, cfg.spike_multiplier)
    if onset is None:
        return meta.duration_s - meta.fault_start_s
    changes = [t for t in change_times(series, meta.fault_start_s) if t < onset]
    return changes[-1] - meta.fault_start_s if changes else None


def recovery_time(log: SessionLog, cfg: ExtractionConfig) -> Optional[float]:
    """Seconds from fault start until the low-pressure alarm last clears.

    Only defined for the tank scenarios; the alarm-flood scenario has no
    control-room recovery to time.
    """
    meta = log.meta
    if meta.scenario is Scenario.S3:
        raise ContractError("recovery_time is not defined for scenario S3")
    series = _require(log, cfg.variables.pressure_alarm)
    t = last_clear_time(series, meta.fault_start_s)
    return None if t is None else t - meta.fault_start_s


def accuracy_mse(log: SessionLog, cfg: ExtractionConfig) -> Optional[float]:
    """Mean squared deviation of the adjusted value from the procedure target.

    Averaged over the window from the last adjustment to the end of the
    log. Absent when the operator never touched the scale; dataset
    assembly fills that with 0 and flags the fill.
    """
    meta = log.meta
    name = cfg.variables.accuracy_target[meta.scenario.value]
    series = _require(log, name)
    target = cfg.target_mean(meta.scenario)
    changes = change_times(series, meta.fault_start_s)
    if not changes:
        return None
    last_change = changes[-1]
    window = [v for t, v in series if t >= last_change]
    sq = [(v - target) ** 2 for v in window]
    return float(np.mean(sq))


def count_alarm_activations(log: SessionLog) -> int:
    """Total activations over every alarm series, counting re-activations."""
    return sum(count_events(log.series[name]) for name in log.alarm_series_names())


def interaction_counts(
    log: SessionLog, cfg: ExtractionConfig
) -> tuple[int, int, int, Optional[int]]:
    """(alarms_silenced, acknowledgements, mimics_opened, procedures_opened).

    Absent interaction series count as zero activity; procedure opens are
    only recorded for groups whose displays track them, absent otherwise.
    """
    v = cfg.variables

    def count(name: str) -> int:
        series = log.get(name)
        return count_events(series) if series is not None else 0

    procedures: Optional[int] = None
    if log.meta.group.has_procedure_tracking:
        procedures = count(v.procedures)
    return count(v.silenced), count(v.acknowledged), count(v.mimics), procedures


def consequence_rank(log: SessionLog, cfg: ExtractionConfig) -> int:
    """Severity rank 1..5 of the physical outcome.

    Tank scenarios walk the pressure ladder worst-first: implosion (5) when
    the pressure floor was breached and the emergency stop fired, shutdown
    (4) when either happened, air in the tank (3) below the impurity band,
    impurity (2) inside it, safe (1) when the relief valve held the
    pressure. The flood scenario is binary: reactor overheated (5) or
    safe (1).
    """
    meta = log.meta
    if meta.scenario is Scenario.S3:
        temps = _require(log, cfg.variables.reactor_temp)
        max_temp = max(v for _, v in temps)
        return 5 if max_temp >= cfg.reactor_overheat_level else 1

    pressures = _require(log, cfg.variables.tank_pressure)
    emergency_series = _require(log, cfg.variables.emergency_stop)
    min_pressure = min(v for _, v in pressures)
    emergency = any(v != 0.0 for _, v in emergency_series)

    floor_breached = min_pressure <= cfg.shutdown_level
    if floor_breached and emergency:
        return 5
    if floor_breached or emergency:
        return 4
    if min_pressure < cfg.impurity_low:
        return 3
    if min_pressure < cfg.impurity_high:
        return 2
    return 1


def error_label(log: SessionLog, cfg: ExtractionConfig) -> bool:
    """True when the session counts as an operator failure.

    Tank scenarios succeed when the pressure is recovering or back to a
    normal level at the end and no shutdown-grade consequence occurred; the
    backup scenario additionally fails outright when the operator never
    switched to the backup supply. The flood scenario fails iff the
    reactor reached the high-high temperature level.
    """
    meta = log.meta
    if meta.scenario is Scenario.S3:
        temps = _require(log, cfg.variables.reactor_temp)
        return max(v for _, v in temps) >= cfg.reactor_overheat_level

    rank = consequence_rank(log, cfg)
    pressures = [v for _, v in _require(log, cfg.variables.tank_pressure)]
    rising = len(pressures) >= 2 and pressures[-1] > pressures[-2]
    normal = pressures[-1] >= cfg.impurity_high
    success = (rising or normal) and rank < 4
    if meta.scenario is Scenario.S2:
        switch = _require(log, cfg.variables.response_action["S2"])
        if first_switch_on(switch, meta.fault_start_s) is None:
            success = False
    return not success


def overall_performance(
    vector: FeatureVector,
    cohort: Sequence[FeatureVector],
    cfg: ExtractionConfig,
) -> Performance:
    """Classify one session against its scenario cohort.

    Tank scenarios rank recovery time against cohort percentiles (linear
    interpolation between order statistics): optimal within the 25th,
    good within the 50th, poor beyond or when the alarm never cleared.
    The flood scenario uses the survival thresholds plus a safe outcome.
    """
    if not cohort:
        raise ContractError("cohort must not be empty")
    if any(fv.scenario is not vector.scenario for fv in cohort):
        raise ContractError("cohort mixes scenarios")

    if vector.scenario is Scenario.S3:
        survival = vector.response_time_s
        if survival is not None and survival >= cfg.s3_optimal_survival_s:
            if vector.consequence == 1:
                return Performance.OPTIMAL
        if survival is not None and cfg.s3_good_survival_s <= survival < cfg.s3_optimal_survival_s:
            return Performance.GOOD
        return Performance.POOR

    times = [fv.recovery_time_s for fv in cohort if fv.recovery_time_s is not None]
    if not times:
        raise ContractError("cohort has no recovery times to rank against")
    rt = vector.recovery_time_s
    if rt is None:
        return Performance.POOR
    p25, p50 = np.percentile(times, [25, 50])
    if rt <= p25:
        return Performance.OPTIMAL
    if rt <= p50:
        return Performance.GOOD
    return Performance.POOR


# ---------------------------------------------------------------------------
# whole-session extraction


def extract_features(log: SessionLog, cfg: ExtractionConfig) -> FeatureVector:
    """Run every metric rule on one session.

    overall_performance needs the whole cohort and is filled in later by
    assign_performance; accuracy fills follow the missing-data rule (absent
    becomes 0, flagged).
    """
    meta = log.meta
    silenced, acked, mimics, procedures = interaction_counts(log, cfg)
    acc = accuracy_mse(log, cfg)
    return FeatureVector(
        participant_id=meta.participant_id,
        group=meta.group,
        scenario=meta.scenario,
        reaction_time_s=reaction_time(log, cfg),
        response_time_s=response_time(log, cfg),
        recovery_time_s=None if meta.scenario is Scenario.S3 else recovery_time(log, cfg),
        accuracy_mse=0.0 if acc is None else acc,
        accuracy_filled=acc is None,
        alarms_silenced=silenced,
        acknowledgements=acked,
        mimics_opened=mimics,
        procedures_opened=procedures,
        num_alarms=count_alarm_activations(log),
        consequence=consequence_rank(log, cfg),
        error=error_label(log, cfg),
    )


def assign_performance(
    vectors: Sequence[FeatureVector], cfg: ExtractionConfig
) -> list[FeatureVector]:
    """Fill overall_performance once all sessions of a scenario are in.

    The percentile cohort is every session of the same scenario; the
    per-group config mode restricts it to the session's own group.
    """
    out = []
    for fv in vectors:
        cohort = [
            other
            for other in vectors
            if other.scenario is fv.scenario
            and (cfg.cohort_mode == "population" or other.group is fv.group)
        ]
        out.append(
            dataclasses.replace(fv, overall_performance=overall_performance(fv, cohort, cfg))
        )
    return out


# ---------------------------------------------------------------------------
# features file round trip


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (Group, Scenario, Performance)):
        return value.value
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_features(vectors: Sequence[FeatureVector], path: str | Path) -> None:
    """Write feature rows as delimited text, absent values as empty cells."""
    import csv

    from .sessions import FEATURE_COLUMNS

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FEATURE_COLUMNS)
        for fv in vectors:
            writer.writerow([_format_cell(getattr(fv, col)) for col in FEATURE_COLUMNS])


def read_features(path: str | Path) -> list[FeatureVector]:
    import csv

    from .errors import LoadError
    from .sessions import FEATURE_COLUMNS

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != list(FEATURE_COLUMNS):
            raise LoadError("features file does not match the expected column set", path=path)
        out = []
        for row_no, row in enumerate(reader, start=1):
            try:
                out.append(_vector_from_row(row))
            except (KeyError, ValueError) as exc:
                raise LoadError(f"bad feature row: {exc}", path=path, row=row_no)
    return out


def _vector_from_row(row: Mapping[str, str]) -> FeatureVector:
    def opt_float(name: str) -> Optional[float]:
        cell = row[name].strip()
        if cell == "":
            return None
        value = float(cell)
        if not math.isfinite(value):
            raise ValueError(f"non-finite {name}")
        return value

    def opt_int(name: str) -> Optional[int]:
        cell = row[name].strip()
        return None if cell == "" else int(cell)

    perf = row["overall_performance"].strip()
    return FeatureVector(
        participant_id=row["participant_id"],
        group=Group(row["group"]),
        scenario=Scenario(row["scenario"]),
        reaction_time_s=opt_float("reaction_time_s"),
        response_time_s=opt_float("response_time_s"),
        recovery_time_s=opt_float("recovery_time_s"),
        accuracy_mse=opt_float("accuracy_mse"),
        accuracy_filled=row["accuracy_filled"] == "true",
        alarms_silenced=int(row["alarms_silenced"]),
        acknowledgements=int(row["acknowledgements"]),
        mimics_opened=int(row["mimics_opened"]),
        procedures_opened=opt_int("procedures_opened"),
        num_alarms=int(row["num_alarms"]),
        consequence=int(row["consequence"]),
        overall_performance=Performance(perf) if perf else None,
        error=row["error"] == "true",
        tlx_index=opt_float("tlx_index"),
        sart_index=opt_float("sart_index"),
        spam_index=opt_float("spam_index"),
        familiarity=opt_float("familiarity"),
        training=opt_float("training"),
    )
