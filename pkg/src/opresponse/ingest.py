"""Batch loading of historian session logs, manifests and questionnaire files.

File formats:

* Session log: comma-delimited text with a header row. The first column is
  the timestamp in seconds (header ``t``, ``time``, ``timestamp``, or a
  ``*_s`` variant of those); every other column becomes one numeric series
  keyed by its header name. Unknown columns are welcome, that is the whole
  point: new plants map their historian tags without code changes.
* Manifest: a JSON array of session records (path, participant_id, group,
  scenario, fault_start_s, duration_s). Relative paths resolve against the
  manifest's own directory.
* Subjective scores: comma-delimited with header
  ``participant_id,tlx,sart,spam,familiarity,training``; blank cells stay
  absent rather than becoming zeros.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import LoadError
from .sessions import (
    DEFAULT_FAULT_START_S,
    DEFAULT_S3_DURATION_S,
    Group,
    Scenario,
    SessionLog,
    SessionMeta,
)

_TIMESTAMP_NAMES = {"t", "time", "timestamp", "t_s", "time_s", "timestamp_s"}


@dataclass(frozen=True)
class SessionManifest:
    """Pointer to one session log file plus its metadata."""

    path: Path
    participant_id: str
    group: Group
    scenario: Scenario
    fault_start_s: float = DEFAULT_FAULT_START_S
    duration_s: float = DEFAULT_S3_DURATION_S

    def meta(self) -> SessionMeta:
        return SessionMeta(
            participant_id=self.participant_id,
            group=self.group,
            scenario=self.scenario,
            fault_start_s=self.fault_start_s,
            duration_s=self.duration_s,
        )


def load_manifest(path: str | Path) -> list[SessionManifest]:
    """Read a manifest file into session descriptors.

    Group/scenario strings must parse to their enums; a record that does
    not is a load error naming the record index.
    """
    path = Path(path)
    try:
        records = json.loads(path.read_text())
    except FileNotFoundError:
        raise LoadError("manifest file not found", path=path)
    except json.JSONDecodeError as exc:
        raise LoadError(f"manifest is not valid JSON: {exc}", path=path)
    if not isinstance(records, list):
        raise LoadError("manifest must be a JSON array of session records", path=path)

    manifests = []
    for i, rec in enumerate(records):
        try:
            manifests.append(
                SessionManifest(
                    path=(path.parent / rec["path"]).resolve(),
                    participant_id=str(rec["participant_id"]),
                    group=Group(rec["group"]),
                    scenario=Scenario(rec["scenario"]),
                    fault_start_s=float(rec.get("fault_start_s", DEFAULT_FAULT_START_S)),
                    duration_s=float(rec.get("duration_s", DEFAULT_S3_DURATION_S)),
                )
            )
        except (KeyError, ValueError) as exc:
            raise LoadError(f"bad manifest record: {exc}", path=path, row=i)
    return manifests


def load_session(manifest: SessionManifest) -> SessionLog:
    """Parse one historian export into a SessionLog.

    Every non-timestamp column becomes a series. Unparseable or non-finite
    cells and non-monotone timestamps are hard errors naming the offending
    row (1-based, counting the header as row 0) and column.
    """
    path = Path(manifest.path)
    if not path.exists():
        raise LoadError("session log file not found", path=path)

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise LoadError("empty file", path=path)
        if not header or header[0].strip().lower() not in _TIMESTAMP_NAMES:
            raise LoadError(
                "missing timestamp column (first column must be named "
                "t/time/timestamp)",
                path=path,
            )
        names = [h.strip() for h in header[1:]]
        if len(set(names)) != len(names):
            raise LoadError("duplicate column names in header", path=path)

        columns: list[list[tuple[float, float]]] = [[] for _ in names]
        prev_t: Optional[float] = None
        for row_no, row in enumerate(reader, start=1):
            if not row or all(c.strip() == "" for c in row):
                continue
            if len(row) != len(names) + 1:
                raise LoadError(
                    f"expected {len(names) + 1} cells, found {len(row)}",
                    path=path,
                    row=row_no,
                )
            t = _parse_cell(row[0], path, row_no, header[0])
            if prev_t is not None and t <= prev_t:
                raise LoadError(
                    f"timestamp {t} not strictly increasing (previous {prev_t})",
                    path=path,
                    row=row_no,
                )
            prev_t = t
            for j, cell in enumerate(row[1:]):
                v = _parse_cell(cell, path, row_no, names[j])
                columns[j].append((t, v))

    if prev_t is None:
        raise LoadError("file has a header but no data rows", path=path)

    series = {name: tuple(col) for name, col in zip(names, columns)}
    return SessionLog(meta=manifest.meta(), series=series)


def _parse_cell(cell: str, path: Path, row: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise LoadError(f"unparseable numeric cell {cell!r}", path=path, row=row, column=column)
    if not math.isfinite(value):
        raise LoadError(f"non-finite cell {cell!r}", path=path, row=row, column=column)
    return value


def write_session(log: SessionLog, path: str | Path) -> None:
    """Write a SessionLog back to delimited text.

    Inverse of load_session for logs whose series share one timestamp grid
    (the historian export layout). Values are written with shortest
    round-trip float formatting so load(write(log)) == log bit-exactly.
    """
    path = Path(path)
    names = sorted(log.series)
    grids = [tuple(t for t, _ in log.series[n]) for n in names]
    if len(set(grids)) > 1:
        raise ValueError("series are not on a shared timestamp grid")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + names)
        if not names:
            return
        for i, t in enumerate(grids[0]):
            writer.writerow([repr(t)] + [repr(log.series[n][i][1]) for n in names])


SUBJECTIVE_COLUMNS = ("tlx", "sart", "spam", "familiarity", "training")


@dataclass(frozen=True)
class SubjectiveScores:
    tlx: Optional[float] = None
    sart: Optional[float] = None
    spam: Optional[float] = None
    familiarity: Optional[float] = None
    training: Optional[float] = None


def load_subjective(path: str | Path) -> dict[str, SubjectiveScores]:
    """Read per-participant questionnaire indices.

    Missing cells are recorded as absent, never as zero. Duplicate
    participant ids are a hard error: there is no principled merge.
    """
    path = Path(path)
    if not path.exists():
        raise LoadError("subjective scores file not found", path=path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise LoadError("empty file", path=path)
        fieldnames = [f.strip().lower() for f in reader.fieldnames]
        if "participant_id" not in fieldnames:
            raise LoadError("missing participant_id column", path=path)
        missing = [c for c in SUBJECTIVE_COLUMNS if c not in fieldnames]
        if missing:
            raise LoadError(f"missing score columns: {', '.join(missing)}", path=path)

        out: dict[str, SubjectiveScores] = {}
        for row_no, raw in enumerate(reader, start=1):
            row = {k.strip().lower(): v for k, v in raw.items() if k is not None}
            pid = (row.get("participant_id") or "").strip()
            if not pid:
                raise LoadError("blank participant_id", path=path, row=row_no)
            if pid in out:
                raise LoadError(f"duplicate participant_id {pid!r}", path=path, row=row_no)
            scores = {}
            for col in SUBJECTIVE_COLUMNS:
                cell = (row.get(col) or "").strip()
                if cell == "":
                    scores[col] = None
                    continue
                value = _parse_cell(cell, path, row_no, col)
                scores[col] = value
            out[pid] = SubjectiveScores(**scores)
    return out
