"""Trial execution backends and the tabulated benchmark loader.

Tabulated: every config of the space has a pre-collected objective value in
a CSV table (header = dimension names + `value`) with a JSON sidecar
{name, direction, metric, count, dimensions}; the loader verifies declared
count and full coverage, so lookups can never miss at run time.

Subprocess: a command template with {dim} placeholders runs in a per-trial
scratch directory that survives retries (user programs may resume from their
own checkpoints). The result comes back through the sentinel contract:
  * last stdout line matching `SELFAI_RESULT value=<float>`, or
  * a file `selfai_result` in the scratch directory containing {"value": x}.
"""

from __future__ import annotations

import json
import re
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from string import Formatter

from selfai.model import Direction, SearchSpace, TrialConfig

SENTINEL_RE = re.compile(r"^SELFAI_RESULT\s+value=([-+0-9.eE]+)\s*$")
RESULT_FILENAME = "selfai_result"


class ExecutionError(RuntimeError):
    """Base class for trial execution failures; `reason` keys retry policy."""

    reason = "error"


class MissingEntry(ExecutionError):
    reason = "missing_entry"


class NonZeroExit(ExecutionError):
    reason = "nonzero_exit"

    def __init__(self, code: int, stderr_tail: str = "") -> None:
        super().__init__(f"process exited with code {code}: {stderr_tail[:200]}")
        self.code = code


class TrialTimeout(ExecutionError):
    reason = "timeout"


class MissingSentinel(ExecutionError):
    reason = "missing_sentinel"


class RetryVerdict(str, Enum):
    RETRY = "retry"
    GIVE_UP = "give_up"


_TRANSIENT = frozenset({TrialTimeout.reason, NonZeroExit.reason})


def retry_policy(failure: ExecutionError | str, attempts: int, max_attempts: int = 2) -> RetryVerdict:
    """Retry transient failures (timeout, nonzero exit) while attempts remain;
    everything else gives up immediately and is recorded permanently."""
    reason = failure if isinstance(failure, str) else failure.reason
    if reason in _TRANSIENT and attempts < max_attempts:
        return RetryVerdict.RETRY
    return RetryVerdict.GIVE_UP


@dataclass(frozen=True)
class BenchmarkTable:
    """A fully tabulated task: objective value for every config in the space."""

    name: str
    space: SearchSpace
    direction: Direction
    metric: str
    values: tuple[float, ...]  # indexed by config number
    source: str | None = None  # CSV path when loaded from disk

    def __post_init__(self) -> None:
        if len(self.values) != self.space.cardinality:
            raise ValueError(
                f"table {self.name!r} has {len(self.values)} values for "
                f"cardinality {self.space.cardinality}"
            )

    def lookup(self, config: TrialConfig) -> float:
        try:
            return self.values[self.space.index_of(config)]
        except Exception as exc:
            raise MissingEntry(f"config {config!r} not covered by table {self.name!r}: {exc}")

    @property
    def global_best(self) -> float:
        return max(self.values) if self.direction is Direction.MAXIMIZE else min(self.values)


def _coerce_cell(text: str) -> object:
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text  # strings, including the opaque token "None"


def load_table(csv_path: str | Path, sidecar_path: str | Path | None = None) -> BenchmarkTable:
    """Load a benchmark table, verifying declared count and full coverage."""
    import csv as csv_module

    csv_path = Path(csv_path)
    sidecar_path = Path(sidecar_path) if sidecar_path else csv_path.with_suffix(".json")
    meta = json.loads(Path(sidecar_path).read_text())
    for key in ("name", "direction", "metric", "count"):
        if key not in meta:
            raise ValueError(f"sidecar {sidecar_path} missing {key!r}")

    with csv_path.open(newline="") as handle:
        reader = csv_module.reader(handle)
        header = next(reader)
        if header[-1] != "value":
            raise ValueError(f"last column of {csv_path} must be 'value', got {header[-1]!r}")
        dim_names = header[:-1]
        rows = [(row[:-1], float(row[-1])) for row in reader if row]

    typed_rows = [[_coerce_cell(cell) for cell in cells] for cells, _ in rows]
    if "dimensions" in meta:
        ordered = {name: [ _coerce_json_value(v) for v in values] for name, values in meta["dimensions"].items()}
        if list(ordered) != dim_names:
            raise ValueError(f"sidecar dimension names {list(ordered)} != CSV header {dim_names}")
    else:
        # Fallback: per-dimension value order is first appearance in the CSV.
        ordered = {name: [] for name in dim_names}
        for cells in typed_rows:
            for name, cell in zip(dim_names, cells):
                if cell not in ordered[name]:
                    ordered[name].append(cell)

    space = SearchSpace.from_dict(ordered)
    if space.cardinality != int(meta["count"]):
        raise ValueError(
            f"table {meta['name']!r}: cardinality {space.cardinality} != declared count {meta['count']}"
        )
    if len(rows) != space.cardinality:
        raise ValueError(
            f"table {meta['name']!r}: {len(rows)} rows do not cover cardinality {space.cardinality}"
        )

    values: list[float | None] = [None] * space.cardinality
    for cells, value in zip(typed_rows, (v for _, v in rows)):
        config = dict(zip(dim_names, cells))
        number = space.index_of(config)
        if values[number] is not None:
            raise ValueError(f"table {meta['name']!r}: duplicate row for config {number}")
        values[number] = value
    assert all(v is not None for v in values)

    return BenchmarkTable(
        name=str(meta["name"]),
        space=space,
        direction=Direction(meta["direction"]),
        metric=str(meta["metric"]),
        values=tuple(values),  # type: ignore[arg-type]
        source=str(csv_path),
    )


def _coerce_json_value(value: object) -> object:
    return value  # JSON already carries types; tokens like "None" stay strings


@dataclass
class TabulatedBackend:
    """Instant replay of a real experiment: pure lookup, optional simulated
    latency (seconds) for scheduler tests."""

    table: BenchmarkTable
    latency: float = 0.0

    @property
    def deterministic(self) -> bool:
        return self.latency == 0.0

    def run(self, config: TrialConfig, trial_id: int, attempt: int) -> float:
        del trial_id, attempt
        value = self.table.lookup(config)
        if self.latency > 0:
            time.sleep(self.latency)
        return value


@dataclass
class SubprocessBackend:
    """Runs each trial as a subprocess built from a command template.

    The template may reference declared dimension names plus {scratch_dir}
    and {trial}; anything else is rejected at construction. Each trial gets
    a scratch directory that persists across retries.
    """

    command_template: str
    space: SearchSpace
    workdir: Path
    timeout: float = 3600.0

    deterministic = False

    def __post_init__(self) -> None:
        self.workdir = Path(self.workdir)
        allowed = set(self.space.names) | {"scratch_dir", "trial"}
        referenced = {
            name for _, name, _, _ in Formatter().parse(self.command_template) if name
        }
        unknown = referenced - allowed
        if unknown:
            raise ValueError(
                f"command template references undeclared names {sorted(unknown)}; "
                f"allowed: {sorted(allowed)}"
            )

    def scratch_dir(self, trial_id: int) -> Path:
        return self.workdir / f"trial-{trial_id:05d}"

    def run(self, config: TrialConfig, trial_id: int, attempt: int) -> float:
        del attempt  # the scratch dir is reused so programs can self-resume
        scratch = self.scratch_dir(trial_id)
        scratch.mkdir(parents=True, exist_ok=True)
        command = self.command_template.format(
            **config, scratch_dir=str(scratch), trial=trial_id
        )
        try:
            proc = subprocess.run(
                shlex.split(command),
                cwd=scratch,
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except subprocess.TimeoutExpired:
            raise TrialTimeout(f"trial {trial_id} exceeded {self.timeout}s")
        if proc.returncode != 0:
            raise NonZeroExit(proc.returncode, proc.stderr)
        return self._read_result(proc.stdout, scratch, trial_id)

    @staticmethod
    def _read_result(stdout: str, scratch: Path, trial_id: int) -> float:
        for line in reversed(stdout.splitlines()):
            match = SENTINEL_RE.match(line.strip())
            if match:
                return float(match.group(1))
        result_file = scratch / RESULT_FILENAME
        if result_file.exists():
            try:
                return float(json.loads(result_file.read_text())["value"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise MissingSentinel(f"trial {trial_id}: unreadable {RESULT_FILENAME}: {exc}")
        raise MissingSentinel(
            f"trial {trial_id}: no SELFAI_RESULT line on stdout and no {RESULT_FILENAME} file"
        )
