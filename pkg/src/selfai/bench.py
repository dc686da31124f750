"""Benchmark suites: run (table, solver, seed) cells, score trajectories
against the grid-search baseline, aggregate and rank.

The report document is machine-readable JSON with stable key order and no
wall-clock fields, so a suite with fixed seeds and scripted agents is
byte-stable across runs. Per-task rows carry the field names score, aup_d,
best_time, stop_time, best_result, hit and rank; aggregate rows add
mean_rank. Values are stored at full precision; rounding is display-only.
"""

from __future__ import annotations

import json
import logging
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import yaml

from selfai import metrics
from selfai.agent.solver import CognitiveSolver
from selfai.agent.transport import ChatClient, ScriptedTransport, load_playbook
from selfai.manager.backends import BenchmarkTable, TabulatedBackend, load_table
from selfai.manager.events import EventLog, LogicalClock
from selfai.manager.runner import StudyRunner
from selfai.model import Direction, Study, TrialConfig
from selfai.solvers import GridSearch, RandomSearch, TPESearch

logger = logging.getLogger(__name__)

REPORT_SCHEMA = "selfai-report/1"
SOLVER_NAMES = ("grid", "tpe", "random", "llm", "llm-es", "cognitive", "scripted")


class SuiteError(ValueError):
    pass


def default_system_context(table: BenchmarkTable) -> str:
    goal = "maximize" if table.direction is Direction.MAXIMIZE else "minimize"
    dims = ", ".join(table.space.names)
    return (
        f"You are an expert experimentalist tuning the task {table.name!r}. "
        f"The objective is to {goal} the metric {table.metric!r} over the discrete "
        f"hyperparameters: {dims}. Please provide professional and detailed answers."
    )


def make_solver(
    name: str,
    *,
    transport=None,
    playbook: str | Path | None = None,
    endpoint: str | None = None,
    model: str | None = None,
    api_key: str | None = None,
    stop_threshold: float = 0.7,
    tpe_gamma: float = 0.25,
    tpe_alpha: float = 1.0,
    tpe_candidates: int = 24,
    tpe_startup: int = 5,
    unexplored_cap: int = 200,
):
    """Build a solver instance from its CLI/config key."""
    if name == "grid":
        return GridSearch()
    if name == "tpe":
        return TPESearch(
            gamma=tpe_gamma, alpha=tpe_alpha, n_candidates=tpe_candidates, n_startup=tpe_startup
        )
    if name == "random":
        return RandomSearch()
    if name in ("llm", "llm-es", "cognitive", "scripted"):
        mode = "cognitive" if name in ("cognitive", "scripted") else name
        if transport is None:
            if name == "scripted" or playbook is not None:
                if playbook is None:
                    raise SuiteError("scripted solver needs a playbook file")
                transport = load_playbook(playbook)
            else:
                if not endpoint or not model:
                    raise SuiteError(f"solver {name!r} needs an endpoint and model id")
                transport = ChatClient(endpoint, model, api_key=api_key)
        return CognitiveSolver(
            mode, transport, stop_threshold=stop_threshold, unexplored_cap=unexplored_cap
        )
    raise SuiteError(f"unknown solver {name!r}; expected one of {SOLVER_NAMES}")


def run_tabulated_study(
    table: BenchmarkTable,
    solver_name: str,
    *,
    seed: int = 0,
    n_jobs: int = 1,
    slots: int = 1,
    max_trials: int | None = None,
    study_id: str | None = None,
    data_dir: str | Path | None = None,
    system_context: str | None = None,
    seed_suggestions: list[TrialConfig] | None = None,
    supervised: bool = False,
    latency: float = 0.0,
    solver=None,
    on_event: Callable | None = None,
    **solver_kwargs: Any,
) -> Study:
    """Run one solver over one table to a terminal state; returns the study.

    Uses the logical clock, so identical inputs produce byte-identical event
    logs and reasoning traces. When data_dir is omitted the log lives in a
    temporary directory and is discarded.
    """
    study_id = study_id or f"{table.name}-{solver_name}-s{seed}"
    budget = max_trials if max_trials is not None else table.space.cardinality
    budget = min(budget, table.space.cardinality)
    study = Study(
        id=study_id,
        space=table.space,
        direction=table.direction,
        max_trials=budget,
        n_jobs=n_jobs,
        solver=solver_name,
        system_context=system_context if system_context is not None else default_system_context(table),
        metric=table.metric,
        supervised=supervised,
    )
    solver = solver or make_solver(solver_name, **solver_kwargs)
    backend = TabulatedBackend(table, latency=latency)

    def _run(directory: Path) -> Study:
        study_dir = directory / study_id
        log = EventLog(study_dir / "events.log", clock=LogicalClock())
        if table.source and not (study_dir / "meta.json").exists():
            (study_dir / "meta.json").write_text(
                json.dumps({"table": str(table.source), "seed": seed}, sort_keys=True) + "\n"
            )
        runner = StudyRunner(
            study,
            solver,
            backend,
            log,
            slots=slots,
            rng_seed=seed,
            seed_suggestions=seed_suggestions,
            on_event=on_event,
        )
        try:
            return runner.run()
        finally:
            log.close()

    if data_dir is not None:
        return _run(Path(data_dir))
    with tempfile.TemporaryDirectory(prefix="selfai-bench-") as tmp:
        return _run(Path(tmp))


def study_trajectory(study: Study, table: BenchmarkTable) -> metrics.Trajectory:
    values = [t.value for t in study.completed]
    return metrics.Trajectory.from_values(values, table.values, table.direction)


def grid_baseline_trajectory(table: BenchmarkTable) -> metrics.Trajectory:
    """The exhaustive trajectory: every table value in enumeration order."""
    return metrics.Trajectory.from_values(table.values, table.values, table.direction)


@dataclass(frozen=True)
class SuiteEntry:
    table_path: Path
    solvers: tuple[str, ...]
    seeds: tuple[int, ...] = (0,)
    n_jobs: int = 1
    max_trials: int | None = None
    options: dict[str, Any] = field(default_factory=dict)  # playbook/endpoint/model/...


@dataclass(frozen=True)
class BenchSuiteSpec:
    entries: tuple[SuiteEntry, ...]
    output: Path | None = None


def load_suite(path: str | Path) -> BenchSuiteSpec:
    """Parse a suite YAML file and validate every referenced table loads."""
    raw = yaml.safe_load(Path(path).read_text())
    if not isinstance(raw, dict) or not raw.get("tasks"):
        raise SuiteError(f"suite {path} must define a nonempty tasks list")
    base = Path(path).resolve().parent
    entries = []
    for i, item in enumerate(raw["tasks"]):
        if "table" not in item or "solvers" not in item:
            raise SuiteError(f"suite task [{i}] needs table and solvers")
        table_path = Path(item["table"])
        if not table_path.is_absolute():
            table_path = base / table_path
        solvers = tuple(item["solvers"])
        for solver in solvers:
            if solver not in SOLVER_NAMES:
                raise SuiteError(f"suite task [{i}]: unknown solver {solver!r}")
        options = {
            k: v
            for k, v in item.items()
            if k not in ("table", "solvers", "seeds", "n_jobs", "max_trials")
        }
        entries.append(
            SuiteEntry(
                table_path=table_path,
                solvers=solvers,
                seeds=tuple(item.get("seeds", [0])),
                n_jobs=int(item.get("n_jobs", 1)),
                max_trials=item.get("max_trials"),
                options=options,
            )
        )
    spec = BenchSuiteSpec(
        entries=tuple(entries),
        output=Path(raw["output"]) if raw.get("output") else None,
    )
    for entry in spec.entries:
        load_table(entry.table_path)  # raises on any invalid table
    return spec


def run_suite(spec: BenchSuiteSpec) -> dict[str, Any]:
    """Run every (table, solver, seed) cell and build the report document."""
    if not spec.entries:
        raise SuiteError("empty suite")
    rows: list[dict[str, Any]] = []
    errors: list[dict[str, str]] = []
    per_solver_task: dict[str, dict[str, metrics.TaskMetrics]] = {}
    rel_best: dict[str, dict[str, float]] = {}  # optimum-relative best quality

    for entry in spec.entries:
        table = load_table(entry.table_path)
        baseline = grid_baseline_trajectory(table)
        for solver_name in entry.solvers:
            cell_metrics: list[metrics.TaskMetrics] = []
            cell_rel: list[float] = []
            first_traj: metrics.Trajectory | None = None
            try:
                for seed in entry.seeds:
                    study = run_tabulated_study(
                        table,
                        solver_name,
                        seed=seed,
                        n_jobs=entry.n_jobs,
                        max_trials=entry.max_trials,
                        **entry.options,
                    )
                    traj = study_trajectory(study, table)
                    cell_metrics.append(metrics.task_metrics(traj, baseline))
                    cell_rel.append(1.0 / metrics.performance_ratio(traj.best_found(), traj))
                    if first_traj is None:
                        first_traj = traj
            except Exception as exc:
                logger.exception("bench cell failed: %s / %s", table.name, solver_name)
                errors.append({"task": table.name, "solver": solver_name, "error": str(exc)})
                continue
            row_metrics = _mean_metrics(cell_metrics)
            per_solver_task.setdefault(solver_name, {})[table.name] = row_metrics
            rel_best.setdefault(solver_name, {})[table.name] = sum(cell_rel) / len(cell_rel)
            low, high, total = metrics.region_occupancy(first_traj, table.values)
            rows.append(
                {
                    "task": table.name,
                    "solver": solver_name,
                    "seeds": len(entry.seeds),
                    **{k: v for k, v in row_metrics.as_row().items()},
                    "profile": metrics.profile_points(first_traj) if len(entry.seeds) == 1 else None,
                    "region_occupancy": {"low": low, "high": high, "total": total},
                }
            )

    if not rows:
        raise SuiteError("every suite cell failed; nothing to report")

    solvers_with_all_tasks = _complete_solvers(per_solver_task)
    aggregate_rows: list[dict[str, Any]] = []
    if solvers_with_all_tasks:
        report = metrics.aggregate({s: per_solver_task[s] for s in solvers_with_all_tasks})
        for row in rows:
            solver, task = row["solver"], row["task"]
            row["rank"] = report.task_ranks.get(solver, {}).get(task)
        for solver in report.solvers:
            means = report.means[solver]
            aggregate_rows.append(
                {
                    "solver": solver,
                    "score": means["score"],
                    "aup_d": means["aup_d"],
                    "best_time": means["best_time"],
                    "stop_time": means["stop_time"],
                    "best_result": sum(rel_best[solver].values()) / len(rel_best[solver]),
                    "hit": means["hit"],
                    "gain": means["gain"],
                    "mean_rank": report.mean_rank[solver],
                    "rank": report.overall_rank[solver],
                }
            )
        aggregate_rows.sort(key=lambda r: r["rank"])

    document = {
        "schema": REPORT_SCHEMA,
        "tasks": sorted({row["task"] for row in rows}),
        "solvers": sorted({row["solver"] for row in rows}),
        "rows": rows,
        "aggregate": aggregate_rows,
        "errors": errors,
    }
    return document


def write_report(document: dict[str, Any], path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")


def _mean_metrics(cells: list[metrics.TaskMetrics]) -> metrics.TaskMetrics:
    if len(cells) == 1:
        return cells[0]
    n = len(cells)
    return metrics.TaskMetrics(
        gain=sum(c.gain for c in cells) / n,
        best_time=sum(c.best_time for c in cells) / n,
        stop_time=sum(c.stop_time for c in cells) / n,
        p_total=sum(c.p_total for c in cells) / n,
        score=sum(c.score for c in cells) / n,
        aup_d=sum(c.aup_d for c in cells) / n,
        best_result=sum(c.best_result for c in cells) / n,
        hit=sum(float(c.hit) for c in cells) / n,  # fraction once averaged
    )


def _complete_solvers(per_solver_task: dict[str, dict[str, metrics.TaskMetrics]]) -> list[str]:
    """Solvers that produced a row for every task (rankable set)."""
    all_tasks = set()
    for tasks in per_solver_task.values():
        all_tasks |= set(tasks)
    return [s for s, tasks in per_solver_task.items() if set(tasks) == all_tasks]
