"""Event-sourced study state.

Every study mutation is one immutable event appended to a newline-delimited
JSON log, one event per line, sequence numbers strictly increasing with no
gaps. The in-memory Study snapshot is always the left fold of the log, so a
crashed study replays to exactly the pre-crash state: fold the intact
prefix, revert in-flight trials to pending, continue.

A torn final line (the crash case) is truncated with a warning; corruption
anywhere earlier is fatal rather than silently skipped.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterable

from selfai.model import (
    Direction,
    Lifecycle,
    SearchSpace,
    Study,
    TrialRecord,
    TrialStatus,
)

logger = logging.getLogger(__name__)

# Event kinds
STUDY_CREATED = "study_created"
TRIAL_SUBMITTED = "trial_submitted"
TRIAL_STARTED = "trial_started"
TRIAL_COMPLETED = "trial_completed"
TRIAL_FAILED = "trial_failed"
LIFECYCLE_CHANGED = "lifecycle_changed"
SOLVER_DECISION = "solver_decision"
REASONING = "reasoning"

KINDS = (
    STUDY_CREATED,
    TRIAL_SUBMITTED,
    TRIAL_STARTED,
    TRIAL_COMPLETED,
    TRIAL_FAILED,
    LIFECYCLE_CHANGED,
    SOLVER_DECISION,
    REASONING,
)


class CorruptLog(RuntimeError):
    """Sequence gap or unreadable record before the final line."""


class NoStudyCreated(RuntimeError):
    """Replay of a log that never created a study (e.g. empty file)."""


@dataclass(frozen=True)
class Event:
    seq: int
    ts: float
    kind: str
    data: dict[str, Any]

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "ts": self.ts, "kind": self.kind, "data": self.data},
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> Event:
        raw = json.loads(line)
        return cls(seq=int(raw["seq"]), ts=float(raw["ts"]), kind=str(raw["kind"]), data=raw["data"])


class WallClock:
    def now(self) -> float:
        return round(time.time(), 6)


class LogicalClock:
    """Deterministic clock: timestamps are the event sequence numbers, so
    repeated runs of a deterministic study produce byte-identical logs."""

    def __init__(self) -> None:
        self.tick = 0

    def now(self) -> float:
        self.tick += 1
        return float(self.tick)


class EventLog:
    """Append-only NDJSON log with dense sequence numbers.

    The single event writer owns the file handle; readers re-open the path.
    """

    def __init__(self, path: str | Path, clock: WallClock | LogicalClock | None = None) -> None:
        self.path = Path(path)
        self.clock = clock or WallClock()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        existing: list[Event] = []
        if self.path.exists():
            existing, clean_bytes = _scan(self.path)
            if clean_bytes < self.path.stat().st_size:
                # drop the torn tail on disk, or appends would corrupt the log
                with self.path.open("r+b") as handle:
                    handle.truncate(clean_bytes)
        self._seq = existing[-1].seq if existing else 0
        if isinstance(self.clock, LogicalClock):
            self.clock.tick = self._seq
        self._handle = self.path.open("a", encoding="utf-8")

    @property
    def last_seq(self) -> int:
        return self._seq

    def append(self, kind: str, data: dict[str, Any]) -> Event:
        if kind not in KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        self._seq += 1
        event = Event(seq=self._seq, ts=self.clock.now(), kind=kind, data=data)
        self._handle.write(event.to_json() + "\n")
        self._handle.flush()
        return event

    def close(self) -> None:
        self._handle.close()

    def __enter__(self) -> EventLog:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def read_events(path: str | Path) -> list[Event]:
    """Read and validate a log. The final line may be torn (truncated on a
    crash mid-write): it is dropped with a warning. Anything else fatal."""
    return _scan(path)[0]


def _scan(path: str | Path) -> tuple[list[Event], int]:
    """Validated events plus the byte length of the intact prefix."""
    raw = Path(path).read_text(encoding="utf-8")
    lines = raw.splitlines(keepends=True)
    events: list[Event] = []
    clean_bytes = 0
    for i, line in enumerate(lines):
        if not line.strip():
            clean_bytes += len(line.encode("utf-8"))
            continue
        try:
            event = Event.from_json(line)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            if i == len(lines) - 1:
                logger.warning("truncating torn final record of %s: %s", path, exc)
                break
            raise CorruptLog(f"unreadable record at line {i + 1} of {path}: {exc}")
        if not line.endswith("\n") and i == len(lines) - 1:
            # parsed but unterminated: treat as torn (the write was cut short)
            logger.warning("truncating unterminated final record of %s", path)
            break
        expected = events[-1].seq + 1 if events else 1
        if event.seq != expected:
            raise CorruptLog(
                f"sequence gap at line {i + 1} of {path}: expected {expected}, got {event.seq}"
            )
        events.append(event)
        clean_bytes += len(line.encode("utf-8"))
    return events, clean_bytes


def study_created_event(study: Study) -> dict[str, Any]:
    """Payload capturing everything needed to rebuild the initial Study."""
    return {
        "study_id": study.id,
        "dimensions": [[name, list(values)] for name, values in study.space.dimensions],
        "direction": study.direction.value,
        "max_trials": study.max_trials,
        "n_jobs": study.n_jobs,
        "solver": study.solver,
        "system_context": study.system_context,
        "metric": study.metric,
        "supervised": study.supervised,
    }


def fold_event(study: Study | None, event: Event) -> Study | None:
    """Pure fold step: apply one event to a Study snapshot.

    Reasoning and solver-decision events carry no study state; they fold to
    the unchanged snapshot.
    """
    if event.kind == STUDY_CREATED:
        if study is not None:
            raise CorruptLog("duplicate study_created event")
        d = event.data
        return Study(
            id=d["study_id"],
            space=SearchSpace(tuple((n, tuple(v)) for n, v in d["dimensions"])),
            direction=Direction(d["direction"]),
            max_trials=d["max_trials"],
            n_jobs=d["n_jobs"],
            solver=d["solver"],
            system_context=d.get("system_context", ""),
            metric=d.get("metric", "value"),
            supervised=d.get("supervised", False),
        )
    if study is None:
        raise NoStudyCreated("event before study_created")

    if event.kind == TRIAL_SUBMITTED:
        record = TrialRecord(
            trial_id=event.data["trial_id"],
            number=event.data["number"],
            config=study.space.config_at(event.data["number"]),
            status=TrialStatus.PENDING,
            submitted_at=event.ts,
        )
        return replace(study, trials=study.trials + (record,))

    if event.kind in (TRIAL_STARTED, TRIAL_COMPLETED, TRIAL_FAILED):
        trial_id = event.data["trial_id"]
        trials = list(study.trials)
        index = next(i for i, t in enumerate(trials) if t.trial_id == trial_id)
        trial = trials[index]
        if event.kind == TRIAL_STARTED:
            trial = replace(
                trial,
                status=TrialStatus.RUNNING,
                worker=event.data.get("worker"),
                started_at=event.ts,
                attempts=trial.attempts + 1,
            )
        elif event.kind == TRIAL_COMPLETED:
            ordinal = study.completed_count + 1
            trial = replace(
                trial,
                status=TrialStatus.COMPLETED,
                value=float(event.data["value"]),
                ordinal=ordinal,
                ended_at=event.ts,
            )
        else:  # TRIAL_FAILED
            final = bool(event.data.get("final", False))
            trial = replace(
                trial,
                status=TrialStatus.FAILED if final else TrialStatus.PENDING,
                failure=str(event.data.get("reason", "unknown")),
                ended_at=event.ts,
            )
        trials[index] = trial
        return replace(study, trials=tuple(trials))

    if event.kind == LIFECYCLE_CHANGED:
        d = event.data
        updated = study
        if "max_trials" in d:
            updated = replace(updated, max_trials=d["max_trials"])
        if "n_jobs" in d:
            updated = replace(updated, n_jobs=d["n_jobs"])
        return replace(updated, lifecycle=Lifecycle(d["state"]))

    if event.kind in (SOLVER_DECISION, REASONING):
        return study

    raise CorruptLog(f"unknown event kind {event.kind!r}")


def replay(events: Iterable[Event]) -> Study:
    """Fold a full event sequence into the pre-crash Study snapshot.

    Trials left running at the crash revert to pending for re-dispatch.
    """
    study: Study | None = None
    for event in events:
        study = fold_event(study, event)
    if study is None:
        raise NoStudyCreated("log contains no study_created event")
    trials = tuple(
        replace(t, status=TrialStatus.PENDING) if t.status is TrialStatus.RUNNING else t
        for t in study.trials
    )
    return replace(study, trials=trials)


def replay_path(path: str | Path) -> Study:
    return replay(read_events(path))
