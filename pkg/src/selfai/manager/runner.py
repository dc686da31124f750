"""The study orchestrator: executes solver decisions against a backend with
slot-based parallelism, retries, pause/resume steering and stop-override
supervision, all funneled through one event writer.

The runner thread is the only component that appends events or mutates the
study snapshot; control calls (pause, resume, stop, overrides, budget
patches) enqueue commands that the writer applies at safe points — between
trials, between rounds, and while idling. Readers get immutable snapshots.

With a zero-latency tabulated backend trials run serially in dispatch order,
which keeps event logs byte-identical across runs; backends with real
latency use a thread pool bounded by the slot count, and completion events
are appended in actual completion order.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
from concurrent.futures import FIRST_COMPLETED, Future, ThreadPoolExecutor, wait
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Protocol

from selfai.agent.prompts import completed_trials_block
from selfai.manager import events as ev
from selfai.manager.backends import ExecutionError, RetryVerdict, retry_policy
from selfai.model import (
    DecisionKind,
    IllegalTransition,
    Lifecycle,
    SolverDecision,
    Study,
    TrialConfig,
    TrialStatus,
    apply_lifecycle_event,
)
from selfai.solvers import SolverState

logger = logging.getLogger(__name__)

_POLL_S = 0.05


class Solver(Protocol):
    name: str

    def decide(self, state: SolverState, study: Study, n_suggestions: int) -> SolverDecision: ...


class Backend(Protocol):
    deterministic: bool

    def run(self, config: TrialConfig, trial_id: int, attempt: int) -> float: ...


def knowledge_base_view(study: Study) -> str:
    """The structured knowledge base as prompt text: completed trials in
    ordinal order, permanently failed trials annotated with their reason."""
    return completed_trials_block(study)


@dataclass
class _Command:
    name: str
    payload: dict[str, Any]
    reply: queue.SimpleQueue


class StudyRunner:
    """Runs one study to a terminal lifecycle state."""

    def __init__(
        self,
        study: Study,
        solver: Solver,
        backend: Backend,
        log: ev.EventLog,
        *,
        slots: int = 1,
        max_attempts: int = 2,
        rng_seed: int = 0,
        seed_suggestions: list[TrialConfig] | None = None,
        reasoning_path: str | Path | None = None,
        on_event: Callable[[ev.Event], None] | None = None,
    ) -> None:
        if slots < 1:
            raise ValueError("slots must be >= 1")
        self.solver = solver
        self.backend = backend
        self.log = log
        self.slots = slots
        self.max_attempts = max_attempts
        self.on_event = on_event
        self._commands: queue.Queue[_Command] = queue.Queue()
        self._lock = threading.Lock()
        self._stop_requested = False
        self._pause_requested = False
        # pause/stop ack only once their lifecycle event is written, so a
        # returned control call means the transition is observable via GET
        self._deferred_acks: dict[str, list[queue.SimpleQueue]] = {"pause": [], "stop": []}
        self.pending_stop: SolverDecision | None = None
        self._seed_queue = list(seed_suggestions or [])
        for seed in self._seed_queue:
            study.space.validate_config(seed)
        self.reasoning_path = (
            Path(reasoning_path) if reasoning_path else self.log.path.parent / "reasoning.jsonl"
        )

        if self.log.last_seq == 0:
            self._study = None  # built by folding the creation event
            self._append(ev.STUDY_CREATED, ev.study_created_event(study))
        else:
            self._study = study  # replayed snapshot; log continues appending
        self._state = SolverState.from_study(self._study, rng_seed=rng_seed)

    # -- public surface ------------------------------------------------------

    def state(self) -> Study:
        with self._lock:
            return self._study

    def run(self) -> Study:
        """Blocking solver loop until Stopped or Exhausted."""
        if self.state().lifecycle.terminal:
            return self.state()
        if self.state().lifecycle is Lifecycle.CREATED:
            self._transition("start")

        # Trials left pending by a crash (or non-final failures) come first.
        self._dispatch(self._pending_trial_ids())
        while not self.state().lifecycle.terminal:
            self._drain_commands()
            if self._stop_requested:
                self._transition("stop")
                break
            if self._pause_requested:
                self._enter_pause()
                continue
            if self.state().lifecycle is Lifecycle.PAUSED:
                self._wait_while_paused()
                continue

            study = self.state()
            remaining_budget = study.max_trials - study.completed_count
            unexplored = study.unexplored_numbers
            if remaining_budget <= 0 or not unexplored:
                self._transition("exhaust")
                break

            n = min(study.n_jobs, remaining_budget, len(unexplored))
            decision = self._next_decision(study, n)
            self._persist_trace()
            self._append(ev.SOLVER_DECISION, _decision_payload(decision))

            if decision.kind is DecisionKind.STOP:
                if study.supervised:
                    if not self._await_stop_override(decision):
                        continue  # rejected: keep searching
                self._transition("stop")
                break

            trial_ids = self._submit(decision.suggestions)
            self._dispatch(trial_ids)
        self._flush_acks()
        return self.state()

    def pause(self) -> None:
        self._control("pause")

    def resume(self) -> None:
        self._control("resume")

    def stop(self) -> None:
        self._control("stop")

    def stop_override(self, approve: bool) -> None:
        self._control("stop_override", approve=approve)

    def patch_config(self, max_trials: int | None = None, n_jobs: int | None = None) -> None:
        self._control("patch", max_trials=max_trials, n_jobs=n_jobs)

    # -- decision & dispatch ---------------------------------------------------

    def _next_decision(self, study: Study, n: int) -> SolverDecision:
        if self._seed_queue:
            batch, self._seed_queue = self._seed_queue[:n], self._seed_queue[n:]
            return SolverDecision.suggest(batch, rationale="forced initial suggestion")
        return self.solver.decide(self._state, study, n)

    def _submit(self, suggestions: tuple[TrialConfig, ...]) -> list[int]:
        trial_ids: list[int] = []
        for config in suggestions:
            number = self._study.space.index_of(config)
            if number in self._state.explored:
                logger.warning("skipping duplicate suggestion for config %d", number)
                continue
            trial_id = len(self._study.trials)
            self._append(ev.TRIAL_SUBMITTED, {"trial_id": trial_id, "number": number})
            self._state.mark_submitted(number)
            trial_ids.append(trial_id)
        return trial_ids

    def _pending_trial_ids(self) -> list[int]:
        return [t.trial_id for t in self._study.trials if t.status is TrialStatus.PENDING]

    def _dispatch(self, trial_ids: list[int]) -> None:
        if not trial_ids:
            return
        # The serial path keeps zero-latency tabulated runs byte-deterministic;
        # real backends go through the pool so control commands stay responsive
        # (polled every tick) even while a single long trial is in flight.
        if getattr(self.backend, "deterministic", False):
            self._dispatch_serial(list(trial_ids))
        else:
            self._dispatch_pooled(list(trial_ids))

    def _dispatch_serial(self, pending: list[int]) -> None:
        while pending:
            self._drain_commands()
            if self._stop_requested:
                return
            if self._pause_requested or self.state().lifecycle is Lifecycle.PAUSED:
                self._enter_pause()
                if self._stop_requested:
                    return
                continue
            trial_id = pending.pop(0)
            outcome = self._execute(trial_id, worker=0)
            if outcome is _RETRY:
                pending.insert(0, trial_id)

    def _dispatch_pooled(self, pending: list[int]) -> None:
        free_slots = list(range(self.slots))
        in_flight: dict[Future, tuple[int, int]] = {}  # future -> (trial_id, slot)
        with ThreadPoolExecutor(max_workers=self.slots) as pool:
            while pending or in_flight:
                self._drain_commands()
                if not self._stop_requested and not self._pause_requested:
                    while pending and free_slots:
                        trial_id = pending.pop(0)
                        slot = free_slots.pop(0)
                        trial = self._trial(trial_id)
                        self._append(
                            ev.TRIAL_STARTED, {"trial_id": trial_id, "worker": slot}
                        )
                        future = pool.submit(self.backend.run, trial.config, trial_id, trial.attempts + 1)
                        in_flight[future] = (trial_id, slot)
                if not in_flight:
                    if self._stop_requested:
                        return
                    if self._pause_requested:
                        self._enter_pause()
                        if self._stop_requested:
                            return
                    continue
                done, _ = wait(list(in_flight), timeout=_POLL_S, return_when=FIRST_COMPLETED)
                for future in done:
                    trial_id, slot = in_flight.pop(future)
                    free_slots.append(slot)
                    try:
                        value = future.result()
                    except ExecutionError as exc:
                        if self._record_failure(trial_id, exc) is _RETRY:
                            pending.insert(0, trial_id)
                    except Exception as exc:  # backend bug: fail the trial, keep the study
                        self._record_failure(trial_id, ExecutionError(str(exc)))
                    else:
                        self._record_completion(trial_id, value)

    def _execute(self, trial_id: int, worker: int) -> object:
        trial = self._trial(trial_id)
        self._append(ev.TRIAL_STARTED, {"trial_id": trial_id, "worker": worker})
        try:
            value = self.backend.run(trial.config, trial_id, trial.attempts + 1)
        except ExecutionError as exc:
            return self._record_failure(trial_id, exc)
        except Exception as exc:
            return self._record_failure(trial_id, ExecutionError(str(exc)))
        self._record_completion(trial_id, value)
        return _DONE

    def _record_completion(self, trial_id: int, value: float) -> None:
        self._append(ev.TRIAL_COMPLETED, {"trial_id": trial_id, "value": float(value)})
        trial = self._trial(trial_id)
        self._state.observe(trial.number, float(value))

    def _record_failure(self, trial_id: int, error: ExecutionError) -> object:
        trial = self._trial(trial_id)
        verdict = retry_policy(error, trial.attempts, self.max_attempts)
        final = verdict is RetryVerdict.GIVE_UP
        self._append(
            ev.TRIAL_FAILED,
            {
                "trial_id": trial_id,
                "reason": getattr(error, "reason", "error"),
                "detail": str(error)[:500],
                "attempt": trial.attempts,
                "final": final,
            },
        )
        return _DONE if final else _RETRY

    def _trial(self, trial_id: int):
        return next(t for t in self._study.trials if t.trial_id == trial_id)

    # -- control handling ------------------------------------------------------

    def _control(self, name: str, timeout: float = 30.0, **payload: Any) -> None:
        reply: queue.SimpleQueue = queue.SimpleQueue()
        self._commands.put(_Command(name, payload, reply))
        result = reply.get(timeout=timeout)
        if isinstance(result, Exception):
            raise result

    def _drain_commands(self, block: bool = False, timeout: float = _POLL_S) -> None:
        while True:
            try:
                command = self._commands.get(block=block, timeout=timeout if block else None)
            except queue.Empty:
                return
            block = False
            try:
                deferred = self._apply_command(command)
                if not deferred:
                    command.reply.put(None)
            except Exception as exc:
                command.reply.put(exc)

    def _apply_command(self, command: _Command) -> bool:
        """Apply one control command; True means the ack is deferred until
        the corresponding lifecycle event lands."""
        name = command.name
        if name == "pause":
            # Validate now so callers get IllegalTransition immediately; the
            # lifecycle event is written once in-flight trials have drained.
            apply_lifecycle_event(self.state(), "pause")
            self._pause_requested = True
            self._deferred_acks["pause"].append(command.reply)
            return True
        elif name == "resume":
            if self.state().lifecycle is Lifecycle.PAUSED:
                self._transition("resume")
            elif self._pause_requested:
                self._pause_requested = False
            else:
                raise IllegalTransition(f"resume illegal in {self.state().lifecycle.value}")
        elif name == "stop":
            apply_lifecycle_event(self.state(), "stop")
            self._stop_requested = True
            self._deferred_acks["stop"].append(command.reply)
            return True
        elif name == "stop_override":
            if self.pending_stop is None:
                raise IllegalTransition("no pending stop verdict to override")
            approve = bool(command.payload["approve"])
            self._append(ev.SOLVER_DECISION, {"type": "stop_override", "approve": approve})
            self._override_result = approve
            self.pending_stop = None
        elif name == "patch":
            study = self.state()
            changes: dict[str, int] = {}
            if command.payload.get("max_trials") is not None:
                study = apply_lifecycle_event(study, "set_max_trials", command.payload["max_trials"])
                changes["max_trials"] = command.payload["max_trials"]
            if command.payload.get("n_jobs") is not None:
                study = apply_lifecycle_event(study, "set_n_jobs", command.payload["n_jobs"])
                changes["n_jobs"] = command.payload["n_jobs"]
            if changes:
                self._append(ev.LIFECYCLE_CHANGED, {"state": study.lifecycle.value, **changes})
        else:
            raise ValueError(f"unknown command {name!r}")
        return False

    def _enter_pause(self) -> None:
        self._pause_requested = False
        self._transition("pause")
        self._wait_while_paused()

    def _wait_while_paused(self) -> None:
        while self.state().lifecycle is Lifecycle.PAUSED and not self._stop_requested:
            self._drain_commands(block=True, timeout=_POLL_S)
        if self._stop_requested and self.state().lifecycle is Lifecycle.PAUSED:
            # stop arrived while paused: resume first, the loop will stop next
            self._transition("resume")

    def _await_stop_override(self, decision: SolverDecision) -> bool:
        """Supervised mode: park on the verdict until a human approves or
        rejects it. Returns True when the stop should apply."""
        self.pending_stop = decision
        self._override_result: bool | None = None
        while self.pending_stop is not None and not self._stop_requested:
            self._drain_commands(block=True, timeout=_POLL_S)
        if self._stop_requested:
            return True
        return bool(self._override_result)

    # -- event plumbing ----------------------------------------------------------

    def _append(self, kind: str, data: dict[str, Any]) -> None:
        event = self.log.append(kind, data)
        with self._lock:
            self._study = ev.fold_event(self._study, event)
        if self.on_event is not None:
            self.on_event(event)

    def _transition(self, lifecycle_event: str) -> None:
        study = apply_lifecycle_event(self.state(), lifecycle_event)
        self._append(ev.LIFECYCLE_CHANGED, {"state": study.lifecycle.value})
        if lifecycle_event in self._deferred_acks:
            for reply in self._deferred_acks[lifecycle_event]:
                reply.put(None)
            self._deferred_acks[lifecycle_event].clear()

    def _flush_acks(self) -> None:
        # terminal exit: release any caller still waiting on a deferred ack
        for replies in self._deferred_acks.values():
            for reply in replies:
                reply.put(None)
            replies.clear()

    def _persist_trace(self) -> None:
        drain = getattr(self.solver, "drain_trace", None)
        if drain is None:
            return
        records = drain()
        if not records:
            return
        with self.reasoning_path.open("a", encoding="utf-8") as handle:
            for record in records:
                payload = {
                    "round": record.round,
                    "phase": record.phase,
                    "prompt": record.prompt,
                    "response": record.response,
                    "parsed": record.parsed,
                    "elapsed_s": record.elapsed_s,
                }
                self._append(ev.REASONING, payload)
                handle.write(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")


def _decision_payload(decision: SolverDecision) -> dict[str, Any]:
    payload: dict[str, Any] = {"kind": decision.kind.value, "rationale": decision.rationale}
    if decision.kind is DecisionKind.SUGGEST:
        payload["suggestions"] = [dict(c) for c in decision.suggestions]
    else:
        payload["confidence"] = decision.confidence
    return payload


class _Marker:
    def __init__(self, name: str) -> None:
        self.name = name

    def __repr__(self) -> str:
        return self.name


_DONE = _Marker("DONE")
_RETRY = _Marker("RETRY")
