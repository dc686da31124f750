"""The study control API: a FastAPI service wrapping the core package.

Every mutation is a thin veneer over the per-study event writer; reads are
snapshots or the event stream itself (server-sent events). Auth is a single
static bearer token taken from SELFAI_API_TOKEN; when the variable is unset
the API is open (local development). The token, model credentials and
endpoint URLs are never written to logs, traces or reports.
"""

from __future__ import annotations

import json
import os
import queue
from typing import Iterator, Optional

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse

from selfai.manager.events import Event
from selfai.model import IllegalTransition, InvalidAdjustment, Lifecycle, Study, TrialStatus
from selfai.service import schemas
from selfai.service.state import StudyNotFound, StudyNotLive, StudyStore

TOKEN_ENV = "SELFAI_API_TOKEN"


def create_app(data_dir: str, token: str | None = None) -> FastAPI:
    store = StudyStore(data_dir)
    expected_token = token if token is not None else os.environ.get(TOKEN_ENV)

    async def require_auth(request: Request) -> None:
        if not expected_token:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {expected_token}":
            raise HTTPException(status_code=401, detail="invalid or missing bearer token")

    app = FastAPI(title="selfai control API", dependencies=[Depends(require_auth)])
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store

    def get_study(study_id: str) -> Study:
        try:
            return store.snapshot(study_id)
        except StudyNotFound:
            raise HTTPException(status_code=404, detail=f"study {study_id} not found")

    def summarize(study_id: str, study: Study) -> schemas.StudySummary:
        best = study.best_completed()
        pending = store.pending_stop(study_id)
        return schemas.StudySummary(
            id=study.id,
            solver=study.solver,
            direction=study.direction.value,
            lifecycle=study.lifecycle.value,
            metric=study.metric,
            max_trials=study.max_trials,
            n_jobs=study.n_jobs,
            completed=study.completed_count,
            cardinality=study.space.cardinality,
            best_value=best.value if best else None,
            supervised=study.supervised,
            live=store.is_live(study_id),
            pending_stop=(
                schemas.PendingStopView(
                    confidence=pending.confidence or 0.0, rationale=pending.rationale
                )
                if pending
                else None
            ),
        )

    @app.get("/healthz")
    def healthz() -> dict:
        return {"ok": True}

    @app.get("/studies", response_model=list[schemas.StudySummary])
    def list_studies() -> list[schemas.StudySummary]:
        return [summarize(sid, store.snapshot(sid)) for sid in store.ids()]

    @app.post("/studies", response_model=schemas.StudySummary, status_code=201)
    def create_study(request: schemas.CreateStudyRequest) -> schemas.StudySummary:
        try:
            study_id = store.create_study(request)
        except FileExistsError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except (ValueError, FileNotFoundError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return summarize(study_id, store.snapshot(study_id))

    @app.get("/studies/{study_id}", response_model=schemas.StudyDetail)
    def study_detail(study_id: str) -> schemas.StudyDetail:
        study = get_study(study_id)
        summary = summarize(study_id, study)
        curve: list[list[float]] = []
        best: float | None = None
        for t in study.completed:
            better = best is None or (
                t.value > best if study.direction.value == "maximize" else t.value < best
            )
            if better:
                best = t.value
            curve.append([float(t.ordinal), float(best)])
        return schemas.StudyDetail(
            **summary.model_dump(),
            dimensions={name: list(values) for name, values in study.space.dimensions},
            best_curve=curve,
        )

    @app.get("/studies/{study_id}/trials", response_model=list[schemas.TrialRow])
    def study_trials(study_id: str) -> list[schemas.TrialRow]:
        study = get_study(study_id)
        return [
            schemas.TrialRow(
                trial_id=t.trial_id,
                number=t.number,
                ordinal=t.ordinal,
                config=t.config,
                value=t.value,
                status=t.status.value,
                attempts=t.attempts,
                worker=t.worker,
                failure=t.failure,
            )
            for t in study.trials
        ]

    @app.get("/studies/{study_id}/reasoning", response_model=list[schemas.ReasoningRow])
    def study_reasoning(study_id: str) -> list[schemas.ReasoningRow]:
        get_study(study_id)
        return [schemas.ReasoningRow(**row) for row in store.reasoning_rows(study_id)]

    @app.get("/studies/{study_id}/metrics", response_model=schemas.MetricsResponse)
    def study_metrics(study_id: str) -> schemas.MetricsResponse:
        get_study(study_id)
        row = store.task_metrics(study_id)
        if row is None:
            raise HTTPException(
                status_code=409,
                detail="metrics unavailable: no table metadata or no completed trials",
            )
        return schemas.MetricsResponse(**row)

    def control(study_id: str, action) -> schemas.OkResponse:
        get_study(study_id)
        try:
            runner = store.runner_for_control(study_id)
            action(runner)
        except StudyNotLive as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except (IllegalTransition, InvalidAdjustment) as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except queue.Empty:
            raise HTTPException(status_code=504, detail="runner did not acknowledge in time")
        return schemas.OkResponse(lifecycle=store.snapshot(study_id).lifecycle.value)

    @app.post("/studies/{study_id}/pause", response_model=schemas.OkResponse)
    def pause(study_id: str) -> schemas.OkResponse:
        return control(study_id, lambda r: r.pause())

    @app.post("/studies/{study_id}/resume", response_model=schemas.OkResponse)
    def resume(study_id: str) -> schemas.OkResponse:
        return control(study_id, lambda r: r.resume())

    @app.post("/studies/{study_id}/stop", response_model=schemas.OkResponse)
    def stop(study_id: str) -> schemas.OkResponse:
        return control(study_id, lambda r: r.stop())

    @app.post("/studies/{study_id}/stop-override", response_model=schemas.OkResponse)
    def stop_override(study_id: str, body: schemas.StopOverrideRequest) -> schemas.OkResponse:
        return control(study_id, lambda r: r.stop_override(body.approve))

    @app.patch("/studies/{study_id}/config", response_model=schemas.OkResponse)
    def patch_config(study_id: str, body: schemas.ConfigPatchRequest) -> schemas.OkResponse:
        return control(
            study_id, lambda r: r.patch_config(max_trials=body.max_trials, n_jobs=body.n_jobs)
        )

    @app.get("/studies/{study_id}/events")
    def event_stream(study_id: str, request: Request, after: int = 0) -> StreamingResponse:
        try:
            live_queue, stored = store.subscribe(study_id)
        except StudyNotFound:
            raise HTTPException(status_code=404, detail=f"study {study_id} not found")

        def stream() -> Iterator[str]:
            last_seq = after
            for event in stored:
                if event.seq > last_seq:
                    last_seq = event.seq
                    yield _sse(event)
            if live_queue is None:
                yield "event: end\ndata: {}\n\n"
                return
            idle = 0.0
            while True:
                try:
                    event = live_queue.get(timeout=0.25)
                except queue.Empty:
                    idle += 0.25
                    if not store.is_live(study_id):
                        yield "event: end\ndata: {}\n\n"
                        return
                    if idle >= 10.0:
                        idle = 0.0
                        yield ": keepalive\n\n"
                    continue
                idle = 0.0
                if event.seq > last_seq:
                    last_seq = event.seq
                    yield _sse(event)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app


def _sse(event: Event) -> str:
    payload = json.dumps(
        {"seq": event.seq, "ts": event.ts, "kind": event.kind, "data": event.data},
        sort_keys=True,
    )
    return f"id: {event.seq}\ndata: {payload}\n\n"
