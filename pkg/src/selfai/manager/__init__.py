"""Experiment orchestration: event-sourced study state, execution backends
(tabulated lookup and subprocess jobs), slot-based scheduling, retries and
crash recovery by log replay."""

from selfai.manager.backends import (
    BenchmarkTable,
    ExecutionError,
    MissingEntry,
    MissingSentinel,
    NonZeroExit,
    SubprocessBackend,
    TabulatedBackend,
    TrialTimeout,
    load_table,
    retry_policy,
    RetryVerdict,
)
from selfai.manager.events import (
    CorruptLog,
    Event,
    EventLog,
    LogicalClock,
    NoStudyCreated,
    WallClock,
    fold_event,
    replay,
    study_created_event,
)
from selfai.manager.runner import StudyRunner, knowledge_base_view

__all__ = [
    "BenchmarkTable",
    "CorruptLog",
    "Event",
    "EventLog",
    "ExecutionError",
    "LogicalClock",
    "MissingEntry",
    "MissingSentinel",
    "NoStudyCreated",
    "NonZeroExit",
    "RetryVerdict",
    "StudyRunner",
    "SubprocessBackend",
    "TabulatedBackend",
    "TrialTimeout",
    "WallClock",
    "fold_event",
    "knowledge_base_view",
    "load_table",
    "replay",
    "retry_policy",
    "study_created_event",
]
