"""Core domain model: search spaces, trials, studies and the study lifecycle.

Everything here is plain data plus pure functions. Mutation happens by
constructing new values (the experiment manager folds events into fresh
snapshots); nothing in this module touches disk or the network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterator, Mapping, Sequence

Scalar = Any  # int | float | str — a single hyperparameter value
TrialConfig = dict[str, Scalar]


class Direction(str, Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"


class TrialStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


class Lifecycle(str, Enum):
    CREATED = "created"
    RUNNING = "running"
    PAUSED = "paused"
    STOPPED = "stopped"
    EXHAUSTED = "exhausted"

    @property
    def terminal(self) -> bool:
        return self in (Lifecycle.STOPPED, Lifecycle.EXHAUSTED)


class DecisionKind(str, Enum):
    SUGGEST = "suggest"
    STOP = "stop"


class InvalidSearchSpace(ValueError):
    """Raised when a search space violates a construction invariant."""


class IllegalTransition(RuntimeError):
    """Raised for a lifecycle event the transition graph does not allow."""


class InvalidAdjustment(ValueError):
    """Raised for a config adjustment that would break a study invariant."""


@dataclass(frozen=True)
class SearchSpace:
    """The universe of candidate configurations: ordered discrete dimensions.

    Configurations are addressed by a stable 0-based "number": the index in
    the lexicographic enumeration where the last dimension varies fastest.
    That numbering is what prompts, tables and solvers refer to.
    """

    dimensions: tuple[tuple[str, tuple[Scalar, ...]], ...]

    def __post_init__(self) -> None:
        names = [name for name, _ in self.dimensions]
        if not names:
            raise InvalidSearchSpace("search space needs at least one dimension")
        if len(set(names)) != len(names):
            raise InvalidSearchSpace(f"duplicate dimension names in {names}")
        for name, values in self.dimensions:
            if len(values) == 0:
                raise InvalidSearchSpace(f"dimension {name!r} has no values")
            if len(set(map(_key, values))) != len(values):
                raise InvalidSearchSpace(f"dimension {name!r} has duplicate values")

    @classmethod
    def from_dict(cls, mapping: Mapping[str, Sequence[Scalar]]) -> SearchSpace:
        return cls(tuple((name, tuple(values)) for name, values in mapping.items()))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.dimensions)

    @property
    def cardinality(self) -> int:
        return math.prod(len(values) for _, values in self.dimensions)

    def values_of(self, name: str) -> tuple[Scalar, ...]:
        for dim, values in self.dimensions:
            if dim == name:
                return values
        raise KeyError(name)

    def config_at(self, number: int) -> TrialConfig:
        """Decode a config number via mixed-radix positional notation."""
        if not 0 <= number < self.cardinality:
            raise IndexError(f"config number {number} out of range [0, {self.cardinality})")
        config: TrialConfig = {}
        remainder = number
        for name, values in reversed(self.dimensions):
            remainder, digit = divmod(remainder, len(values))
            config[name] = values[digit]
        return {name: config[name] for name, _ in self.dimensions}

    def index_of(self, config: TrialConfig) -> int:
        self.validate_config(config)
        number = 0
        for name, values in self.dimensions:
            digit = [_key(v) for v in values].index(_key(config[name]))
            number = number * len(values) + digit
        return number

    def validate_config(self, config: TrialConfig) -> None:
        if set(config) != set(self.names):
            raise InvalidSearchSpace(
                f"config keys {sorted(config)} != dimension names {sorted(self.names)}"
            )
        for name, values in self.dimensions:
            if _key(config[name]) not in {_key(v) for v in values}:
                raise InvalidSearchSpace(
                    f"value {config[name]!r} not a candidate of dimension {name!r}"
                )

    def __contains__(self, config: TrialConfig) -> bool:
        try:
            self.validate_config(config)
            return True
        except InvalidSearchSpace:
            return False

    def enumerate(self) -> Iterator[tuple[int, TrialConfig]]:
        for number in range(self.cardinality):
            yield number, self.config_at(number)


def space_cardinality(space: SearchSpace) -> int:
    return space.cardinality


def enumerate_configs(space: SearchSpace) -> list[TrialConfig]:
    """All configs in canonical order; the list index is the config number."""
    return [config for _, config in space.enumerate()]


@dataclass(frozen=True)
class TrialRecord:
    """One evaluated (or in-flight) configuration within a study."""

    trial_id: int  # submission index, unique within the study
    number: int  # config number in the space enumeration
    config: TrialConfig
    status: TrialStatus = TrialStatus.PENDING
    value: float | None = None
    ordinal: int | None = None  # 1-based completion index, Completed only
    attempts: int = 0
    worker: int | None = None
    failure: str | None = None
    submitted_at: float | None = None
    started_at: float | None = None
    ended_at: float | None = None


@dataclass(frozen=True)
class SolverDecision:
    kind: DecisionKind
    suggestions: tuple[TrialConfig, ...] = ()
    confidence: float | None = None
    rationale: str = ""

    @classmethod
    def suggest(cls, configs: Sequence[TrialConfig], rationale: str = "") -> SolverDecision:
        return cls(DecisionKind.SUGGEST, suggestions=tuple(dict(c) for c in configs), rationale=rationale)

    @classmethod
    def stop(cls, confidence: float, rationale: str = "") -> SolverDecision:
        return cls(DecisionKind.STOP, confidence=confidence, rationale=rationale)


@dataclass(frozen=True)
class Study:
    """One search run: immutable snapshot of config, history and lifecycle."""

    id: str
    space: SearchSpace
    direction: Direction
    max_trials: int
    n_jobs: int = 1
    solver: str = "grid"
    system_context: str = ""
    metric: str = "value"
    lifecycle: Lifecycle = Lifecycle.CREATED
    trials: tuple[TrialRecord, ...] = ()
    supervised: bool = False

    def __post_init__(self) -> None:
        if self.max_trials < 1:
            raise InvalidAdjustment("max_trials must be >= 1")
        if self.max_trials > self.space.cardinality:
            raise InvalidAdjustment(
                f"max_trials {self.max_trials} exceeds space cardinality {self.space.cardinality}"
            )
        if self.n_jobs < 1:
            raise InvalidAdjustment("n_jobs must be >= 1")

    @property
    def completed(self) -> tuple[TrialRecord, ...]:
        done = [t for t in self.trials if t.status is TrialStatus.COMPLETED]
        return tuple(sorted(done, key=lambda t: t.ordinal))

    @property
    def completed_count(self) -> int:
        return sum(1 for t in self.trials if t.status is TrialStatus.COMPLETED)

    @property
    def explored_numbers(self) -> set[int]:
        """Config numbers already submitted; never re-suggested."""
        return {t.number for t in self.trials}

    @property
    def unexplored_numbers(self) -> list[int]:
        explored = self.explored_numbers
        return [n for n in range(self.space.cardinality) if n not in explored]

    def best_completed(self) -> TrialRecord | None:
        """Best completed trial; ties go to the earliest ordinal."""
        best: TrialRecord | None = None
        for t in self.completed:  # ordinal order, so first win is kept on ties
            if best is None:
                best = t
            elif self.direction is Direction.MAXIMIZE and t.value > best.value:
                best = t
            elif self.direction is Direction.MINIMIZE and t.value < best.value:
                best = t
        return best


# Lifecycle transition graph. Config adjustments are not transitions; they are
# validated separately and legal only while Running or Paused.
_TRANSITIONS: dict[tuple[Lifecycle, str], Lifecycle] = {
    (Lifecycle.CREATED, "start"): Lifecycle.RUNNING,
    (Lifecycle.RUNNING, "pause"): Lifecycle.PAUSED,
    (Lifecycle.PAUSED, "resume"): Lifecycle.RUNNING,
    (Lifecycle.RUNNING, "stop"): Lifecycle.STOPPED,
    (Lifecycle.RUNNING, "exhaust"): Lifecycle.EXHAUSTED,
}

LIFECYCLE_EVENTS = ("start", "pause", "resume", "stop", "exhaust", "set_max_trials", "set_n_jobs")
_ADJUSTMENTS = ("set_max_trials", "set_n_jobs")


def apply_lifecycle_event(study: Study, event: str, value: int | None = None) -> Study:
    """Apply a lifecycle or config-adjustment event, returning a new Study.

    Raises IllegalTransition for moves outside the transition graph and
    InvalidAdjustment for budget changes that would break study invariants.
    """
    if event in _ADJUSTMENTS:
        if study.lifecycle not in (Lifecycle.RUNNING, Lifecycle.PAUSED):
            raise IllegalTransition(f"cannot adjust config while {study.lifecycle.value}")
        if value is None or value < 1:
            raise InvalidAdjustment(f"{event} needs a positive integer, got {value!r}")
        if event == "set_max_trials":
            if value < study.completed_count:
                raise InvalidAdjustment(
                    f"max_trials {value} below completed count {study.completed_count}"
                )
            if value > study.space.cardinality:
                raise InvalidAdjustment(
                    f"max_trials {value} exceeds space cardinality {study.space.cardinality}"
                )
            return replace(study, max_trials=value)
        return replace(study, n_jobs=value)

    target = _TRANSITIONS.get((study.lifecycle, event))
    if target is None:
        raise IllegalTransition(f"event {event!r} not allowed in state {study.lifecycle.value}")
    return replace(study, lifecycle=target)


def _key(value: Scalar) -> tuple[str, str]:
    """Identity key for candidate values: type-aware so 1 != "1" but 1 == 1.0 stays distinct."""
    if isinstance(value, bool):
        return ("bool", str(value))
    if isinstance(value, int):
        return ("num", repr(value))
    if isinstance(value, float):
        return ("num", repr(value))
    return (type(value).__name__, str(value))
