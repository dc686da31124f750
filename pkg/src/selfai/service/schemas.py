"""Pydantic request/response models for the study control API."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class PendingStopView(BaseModel):
    confidence: float
    rationale: str = ""


class StudySummary(BaseModel):
    id: str
    solver: str
    direction: str
    lifecycle: str
    metric: str
    max_trials: int
    n_jobs: int
    completed: int
    cardinality: int
    best_value: Optional[float] = None
    supervised: bool = False
    live: bool = False
    pending_stop: Optional[PendingStopView] = None


class StudyDetail(StudySummary):
    dimensions: dict[str, list[Any]]
    best_curve: list[list[float]] = Field(
        default_factory=list, description="[ordinal, best-so-far] points"
    )


class TrialRow(BaseModel):
    trial_id: int
    number: int
    ordinal: Optional[int] = None
    config: dict[str, Any]
    value: Optional[float] = None
    status: str
    attempts: int = 0
    worker: Optional[int] = None
    failure: Optional[str] = None


class ReasoningRow(BaseModel):
    round: int
    phase: str
    prompt: str
    response: str
    parsed: dict[str, Any] = Field(default_factory=dict)
    elapsed_s: float = 0.0


class MetricsResponse(BaseModel):
    task: str
    solver: str
    score: float
    aup_d: float
    best_time: float
    stop_time: float
    best_result: float
    hit: bool
    gain: float
    p_total: float
    profile: list[list[float]] = Field(default_factory=list)


class CreateStudyRequest(BaseModel):
    table: str = Field(description="path to a benchmark table CSV")
    solver: str = "grid"
    id: Optional[str] = None
    seed: int = 0
    n_jobs: int = 1
    slots: int = 1
    max_trials: Optional[int] = None
    supervised: bool = False
    latency: float = 0.0
    playbook: Optional[str] = None
    endpoint: Optional[str] = None
    model: Optional[str] = None
    stop_threshold: float = 0.7


class StopOverrideRequest(BaseModel):
    approve: bool


class ConfigPatchRequest(BaseModel):
    max_trials: Optional[int] = None
    n_jobs: Optional[int] = None


class OkResponse(BaseModel):
    ok: bool = True
    lifecycle: Optional[str] = None
