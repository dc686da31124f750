"""Service-side study registry: live runners plus studies replayed from the
data directory. All study mutations go through the per-study runner (the
single event writer); the service is a thin veneer that never holds state
the event log does not."""

from __future__ import annotations

import json
import logging
import queue
import threading
from pathlib import Path
from typing import Iterator

from selfai import metrics
from selfai.bench import (
    default_system_context,
    grid_baseline_trajectory,
    make_solver,
    study_trajectory,
)
from selfai.manager.backends import TabulatedBackend, load_table
from selfai.manager.events import Event, EventLog, LogicalClock, read_events, replay
from selfai.manager.runner import StudyRunner
from selfai.model import Study
from selfai.service.schemas import CreateStudyRequest

logger = logging.getLogger(__name__)


class StudyNotFound(KeyError):
    pass


class StudyNotLive(RuntimeError):
    """Control requested on a study with no live runner in this process."""


class LiveStudy:
    """A runner plus its thread and event fan-out subscribers."""

    def __init__(self, runner: StudyRunner, study_dir: Path) -> None:
        self.runner = runner
        self.study_dir = study_dir
        self.subscribers: list[queue.SimpleQueue] = []
        self._sub_lock = threading.Lock()
        self.thread = threading.Thread(target=runner.run, daemon=True, name=f"study-{study_dir.name}")

    def start(self) -> None:
        self.thread.start()

    def publish(self, event: Event) -> None:
        with self._sub_lock:
            for q in self.subscribers:
                q.put(event)

    def subscribe(self) -> queue.SimpleQueue:
        q: queue.SimpleQueue = queue.SimpleQueue()
        with self._sub_lock:
            self.subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.SimpleQueue) -> None:
        with self._sub_lock:
            if q in self.subscribers:
                self.subscribers.remove(q)


class StudyStore:
    def __init__(self, data_dir: str | Path) -> None:
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.live: dict[str, LiveStudy] = {}
        self._lock = threading.Lock()

    # -- lookup ----------------------------------------------------------------

    def ids(self) -> list[str]:
        on_disk = {
            p.parent.name for p in self.data_dir.glob("*/events.log")
        }
        return sorted(on_disk | set(self.live))

    def study_dir(self, study_id: str) -> Path:
        return self.data_dir / study_id

    def snapshot(self, study_id: str) -> Study:
        live = self.live.get(study_id)
        if live is not None:
            return live.runner.state()
        log_path = self.study_dir(study_id) / "events.log"
        if not log_path.exists():
            raise StudyNotFound(study_id)
        return replay(read_events(log_path))

    def pending_stop(self, study_id: str):
        live = self.live.get(study_id)
        return live.runner.pending_stop if live else None

    def is_live(self, study_id: str) -> bool:
        live = self.live.get(study_id)
        return bool(live and live.thread.is_alive())

    def runner_for_control(self, study_id: str) -> StudyRunner:
        live = self.live.get(study_id)
        if live is None or not live.thread.is_alive():
            if not (self.study_dir(study_id) / "events.log").exists() and live is None:
                raise StudyNotFound(study_id)
            raise StudyNotLive(f"study {study_id} has no live runner")
        return live.runner

    # -- events ------------------------------------------------------------------

    def stored_events(self, study_id: str, after_seq: int = 0) -> list[Event]:
        log_path = self.study_dir(study_id) / "events.log"
        if not log_path.exists():
            raise StudyNotFound(study_id)
        return [e for e in read_events(log_path) if e.seq > after_seq]

    def reasoning_rows(self, study_id: str) -> Iterator[dict]:
        for event in self.stored_events(study_id):
            if event.kind == "reasoning":
                yield event.data

    # -- creation -------------------------------------------------------------------

    def create_study(self, request: CreateStudyRequest) -> str:
        table = load_table(request.table)
        study_id = request.id or f"{table.name}-{request.solver}-s{request.seed}"
        study_dir = self.study_dir(study_id)
        with self._lock:
            if study_id in self.live or (study_dir / "events.log").exists():
                raise FileExistsError(f"study {study_id} already exists")
            budget = request.max_trials or table.space.cardinality
            study = Study(
                id=study_id,
                space=table.space,
                direction=table.direction,
                max_trials=min(budget, table.space.cardinality),
                n_jobs=request.n_jobs,
                solver=request.solver,
                system_context=default_system_context(table),
                metric=table.metric,
                supervised=request.supervised,
            )
            solver = make_solver(
                request.solver,
                playbook=request.playbook,
                endpoint=request.endpoint,
                model=request.model,
                stop_threshold=request.stop_threshold,
            )
            backend = TabulatedBackend(table, latency=request.latency)
            log = EventLog(study_dir / "events.log", clock=LogicalClock())
            (study_dir / "meta.json").write_text(
                json.dumps({"table": str(table.source), "seed": request.seed}, sort_keys=True) + "\n"
            )
            live = LiveStudy(
                StudyRunner(
                    study,
                    solver,
                    backend,
                    log,
                    slots=request.slots,
                    rng_seed=request.seed,
                    on_event=lambda event: self._publish(study_id, event),
                ),
                study_dir,
            )
            self.live[study_id] = live
        live.start()
        return study_id

    def _publish(self, study_id: str, event: Event) -> None:
        live = self.live.get(study_id)
        if live is not None:
            live.publish(event)

    def subscribe(self, study_id: str) -> tuple[queue.SimpleQueue | None, list[Event]]:
        """Live queue (None for finished studies) plus stored catch-up events."""
        live = self.live.get(study_id)
        q = live.subscribe() if live and live.thread.is_alive() else None
        return q, self.stored_events(study_id)

    # -- metrics --------------------------------------------------------------------

    def task_metrics(self, study_id: str) -> dict | None:
        """Metric row against the study's table, when the table is known."""
        meta_path = self.study_dir(study_id) / "meta.json"
        if not meta_path.exists():
            return None
        meta = json.loads(meta_path.read_text())
        table_path = meta.get("table")
        if not table_path or not Path(table_path).exists():
            return None
        table = load_table(table_path)
        study = self.snapshot(study_id)
        if study.completed_count == 0:
            return None
        traj = study_trajectory(study, table)
        row = metrics.task_metrics(traj, grid_baseline_trajectory(table))
        return {
            "task": table.name,
            "solver": study.solver,
            **row.as_row(),
            "profile": metrics.profile_points(traj),
        }
