"""Trajectory evaluation metrics: Gain, Best-/Stop-Time, Score and AUP_D.

A Trajectory is the completed-value sequence of one study on one task,
together with the task's full-table extremes. All functions are pure; given
the same inputs they return bit-identical outputs.

Conventions fixed here:
  * best_time is normalized by the solver's own completed-trial count and is
    exactly 1.0 when the global optimum was never reached;
  * stop_time is normalized by the full per-task budget (table cardinality),
    so an exhaustive solver always scores 1.0;
  * performance ratios are oriented so r >= 1 with r = 1 at the table
    optimum, for both directions; tasks whose objective can be <= 0 are
    shifted by (1 - table_min) before any ratio is formed, identically for
    every solver on that task;
  * the profile rho(tau) counts trials with r >= tau and is integrated as a
    right-continuous step function on the sorted unique ratio values;
  * AUP_D is reported relative to the grid-search trajectory of the same
    task, so the baseline itself is exactly 1.0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from selfai.model import Direction


class DegenerateSpace(ValueError):
    """All table values equal where a spread is required."""


class EmptyTrajectory(ValueError):
    """Operation needs at least one completed trial."""


class NonPositiveDomain(ValueError):
    """Performance ratio formed on an unshifted non-positive domain."""


class MismatchedTaskSets(ValueError):
    """Aggregation requires every solver to cover the same tasks."""


@dataclass(frozen=True)
class Trajectory:
    """Completed objective values of one study plus full-table context.

    values        completed values in ordinal (completion) order
    direction     which way is better
    space_min/max extremes of the objective over the whole table H
    global_best   the optimum over H (space_max or space_min by direction)
    budget        table cardinality: trials an exhaustive solver would run
    stop_ordinal  1-based index of the last executed trial (defaults to len)
    """

    values: tuple[float, ...]
    direction: Direction
    space_min: float
    space_max: float
    global_best: float
    budget: int
    stop_ordinal: int | None = None

    def __post_init__(self) -> None:
        if not self.values:
            raise EmptyTrajectory("trajectory has no completed values")
        n = self.stop_ordinal if self.stop_ordinal is not None else len(self.values)
        if not 1 <= n <= len(self.values):
            raise ValueError(f"stop_ordinal {n} outside 1..{len(self.values)}")
        if self.space_min > self.space_max:
            raise ValueError("space_min above space_max")

    @property
    def stop(self) -> int:
        return self.stop_ordinal if self.stop_ordinal is not None else len(self.values)

    @property
    def executed(self) -> tuple[float, ...]:
        return self.values[: self.stop]

    @classmethod
    def from_values(
        cls,
        visited: Sequence[float],
        table_values: Sequence[float],
        direction: Direction,
        stop_ordinal: int | None = None,
    ) -> Trajectory:
        if len(table_values) == 0:
            raise EmptyTrajectory("table has no values")
        lo, hi = min(table_values), max(table_values)
        best = hi if direction is Direction.MAXIMIZE else lo
        return cls(
            values=tuple(float(v) for v in visited),
            direction=direction,
            space_min=float(lo),
            space_max=float(hi),
            global_best=float(best),
            budget=len(table_values),
            stop_ordinal=stop_ordinal,
        )

    def best_found(self) -> float:
        if self.direction is Direction.MAXIMIZE:
            return max(self.executed)
        return min(self.executed)


def gain(traj: Trajectory) -> float:
    """Normalized quality of the best value found, relative to table extremes.

    A degenerate table (all values equal) yields 1.0: any pick is optimal.
    """
    spread = traj.space_max - traj.space_min
    if spread == 0:
        return 1.0
    if traj.direction is Direction.MAXIMIZE:
        return (traj.best_found() - traj.space_min) / spread
    return (traj.space_max - traj.best_found()) / spread


def best_time(traj: Trajectory) -> float:
    """m/M: first ordinal reaching the table optimum over completed count.

    Exactly 1.0 when the optimum never appears in the trajectory.
    """
    completed = traj.executed
    for ordinal, value in enumerate(completed, start=1):
        if value == traj.global_best:
            return ordinal / len(completed)
    return 1.0


def stop_time(traj: Trajectory) -> float:
    """Stop ordinal over the full per-task budget (table cardinality)."""
    if traj.budget < 1:
        raise ValueError("budget must be positive")
    return traj.stop / traj.budget


def p_total(t_best: float, t_stop: float) -> float:
    return (t_stop + t_best) / 2


def task_score(gain_value: float, t_best: float, t_stop: float) -> float:
    """Score = Gain * (1 - (t_best + t_stop)/2)."""
    for name, v in (("gain", gain_value), ("t_best", t_best), ("t_stop", t_stop)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name}={v} outside [0, 1]")
    return gain_value * (1.0 - p_total(t_best, t_stop))


def domain_shift(traj: Trajectory) -> float:
    """Per-task additive shift making the ratio domain strictly positive.

    Zero when the table minimum is already positive; otherwise 1 - min(H),
    applied identically to every solver on the task.
    """
    return 1.0 - traj.space_min if traj.space_min <= 0 else 0.0


def raw_ratio(value: float, optimum: float, direction: Direction) -> float:
    """Unshifted performance ratio; raises unless the domain is positive."""
    if value <= 0 or optimum <= 0:
        raise NonPositiveDomain(
            f"ratio needs positive values, got value={value}, optimum={optimum}"
        )
    if direction is Direction.MAXIMIZE:
        return optimum / value
    return value / optimum


def performance_ratio(value: float, traj: Trajectory) -> float:
    """Table-optimum-relative ratio, >= 1, equal to 1 at the optimum."""
    shift = domain_shift(traj)
    return raw_ratio(value + shift, traj.global_best + shift, traj.direction)


def trajectory_ratios(traj: Trajectory) -> tuple[float, ...]:
    return tuple(performance_ratio(v, traj) for v in traj.executed)


def performance_profile(traj: Trajectory) -> list[tuple[float, int]]:
    """(tau, rho) pairs on the sorted unique ratio values of this trajectory.

    rho(tau) = |{k : r_k >= tau}|; non-increasing, rho(tau_min) = M.
    """
    ratios = trajectory_ratios(traj)
    taus = sorted(set(ratios))
    return [(tau, sum(1 for r in ratios if r >= tau)) for tau in taus]


def profile_points(traj: Trajectory) -> list[list[float]]:
    """Plot-data export: [tau, rho] pairs (rendering is the dashboard's job)."""
    return [[tau, float(rho)] for tau, rho in performance_profile(traj)]


def _step_integrals(profile: Sequence[tuple[float, int]]) -> tuple[float, float, float]:
    """Exact integrals of rho, x*rho and x^3*rho over the step support.

    rho is right-continuous piecewise-constant: on [tau_k, tau_{k+1}) it holds
    the value rho(tau_k), so each moment integrates in closed form.
    """
    area = 0.0
    first = 0.0
    third = 0.0
    for (tau_a, rho_a), (tau_b, _) in zip(profile, profile[1:]):
        area += rho_a * (tau_b - tau_a)
        first += rho_a * (tau_b**2 - tau_a**2) / 2.0
        third += rho_a * (tau_b**4 - tau_a**4) / 4.0
    return area, first, third


def profile_area(traj: Trajectory) -> float:
    """A: step integral of rho over [tau_min, tau_max]. Zero width => 0."""
    return _step_integrals(performance_profile(traj))[0]


def profile_shape(traj: Trajectory) -> tuple[float, float, float]:
    """(A, G, S): area, centroid and cubic skewness of the profile.

    Raises DegenerateSpace on zero-width support, where none are defined.
    """
    profile = performance_profile(traj)
    area, first, third = _step_integrals(profile)
    if area == 0.0:
        raise DegenerateSpace("profile support has zero width")
    centroid = first / area
    skewness = third / centroid**3
    return area, centroid, skewness


def aup_d(traj: Trajectory, baseline: Trajectory) -> float:
    """Area under the performance-diversity curve, baseline-normalized.

    The skewness S of each profile is normalized against the baseline's
    S_base (1 - (S - S_base)/S_base), mapped through (tanh + 1)/2, and the
    area is divided by that factor; the result is then divided by the
    baseline's own value so the grid-search baseline reports exactly 1.0.
    A zero-width support (every executed trial optimal) reports 0.0.
    """
    traj_profile = performance_profile(traj)
    if _step_integrals(traj_profile)[0] == 0.0:
        return 0.0
    _, _, s_base = profile_shape(baseline)

    def raw(t: Trajectory) -> float:
        area, _, skew = profile_shape(t)
        s_norm = 1.0 - (skew - s_base) / s_base
        s_prime = (math.tanh(s_norm) + 1.0) / 2.0
        return area / s_prime

    return raw(traj) / raw(baseline)


def region_occupancy(
    traj: Trajectory,
    table_values: Sequence[float],
    low_quantile: float = 0.25,
    high_quantile: float = 0.75,
) -> tuple[int, int, int]:
    """Trial counts below the low-quantile value, above the high-quantile
    value, and in total. Quantiles are computed over the full table."""
    if not 0 < low_quantile < high_quantile < 1:
        raise ValueError("need 0 < low_quantile < high_quantile < 1")
    if len(traj.executed) == 0:
        raise EmptyTrajectory("no executed trials")
    ordered = sorted(table_values)
    low_cut = _quantile(ordered, low_quantile)
    high_cut = _quantile(ordered, high_quantile)
    low = sum(1 for v in traj.executed if v < low_cut)
    high = sum(1 for v in traj.executed if v > high_cut)
    return low, high, len(traj.executed)


def _quantile(ordered: Sequence[float], q: float) -> float:
    # Linear interpolation between order statistics, matching numpy's default.
    pos = q * (len(ordered) - 1)
    lo = math.floor(pos)
    hi = math.ceil(pos)
    if lo == hi:
        return ordered[lo]
    return ordered[lo] + (ordered[hi] - ordered[lo]) * (pos - lo)


@dataclass(frozen=True)
class TaskMetrics:
    """Per-task metric row. score == gain*(1-(t_best+t_stop)/2) by construction."""

    gain: float
    best_time: float
    stop_time: float
    p_total: float
    score: float
    aup_d: float
    best_result: float
    hit: bool

    def as_row(self) -> dict[str, float | bool]:
        return {
            "score": self.score,
            "aup_d": self.aup_d,
            "best_time": self.best_time,
            "stop_time": self.stop_time,
            "best_result": self.best_result,
            "hit": self.hit,
            "gain": self.gain,
            "p_total": self.p_total,
        }


def task_metrics(traj: Trajectory, baseline: Trajectory) -> TaskMetrics:
    """Evaluate one trajectory against its task's grid-search baseline."""
    g = gain(traj)
    t_best = best_time(traj)
    t_stop = stop_time(traj)
    return TaskMetrics(
        gain=g,
        best_time=t_best,
        stop_time=t_stop,
        p_total=p_total(t_best, t_stop),
        score=task_score(g, t_best, t_stop),
        aup_d=aup_d(traj, baseline),
        best_result=traj.best_found(),
        hit=traj.best_found() == traj.global_best,
    )


def hit_rate(hits: Sequence[bool | float]) -> float:
    """Fraction of tasks whose best found value equals the table optimum.
    Accepts booleans or per-task hit fractions (seed-averaged rows)."""
    if not hits:
        raise ValueError("need at least one task")
    return sum(float(h) for h in hits) / len(hits)


def rank_scores(scores: Sequence[float]) -> list[int]:
    """Competition ranks for scores, descending: ties share the better rank,
    the next distinct score's rank counts everything strictly better."""
    return [1 + sum(1 for other in scores if other > s) for s in scores]


@dataclass(frozen=True)
class AggregateReport:
    """Cross-task summary: per-task rows, per-solver means, ranks."""

    tasks: tuple[str, ...]
    solvers: tuple[str, ...]
    per_task: Mapping[str, Mapping[str, TaskMetrics]]  # solver -> task -> metrics
    task_ranks: Mapping[str, Mapping[str, int]]  # solver -> task -> rank
    means: Mapping[str, Mapping[str, float]]  # solver -> field -> mean
    mean_rank: Mapping[str, float]
    overall_rank: Mapping[str, int]  # rank of per-solver mean score


def aggregate(results: Mapping[str, Mapping[str, TaskMetrics]]) -> AggregateReport:
    """Aggregate per-solver per-task metrics. Every solver must cover the
    same task set; the reported aggregate score is the mean of per-task
    scores (never the score of pooled trials)."""
    solvers = tuple(results)
    if not solvers:
        raise MismatchedTaskSets("no solvers to aggregate")
    task_sets = {solver: frozenset(rows) for solver, rows in results.items()}
    reference = task_sets[solvers[0]]
    if not reference:
        raise MismatchedTaskSets("no tasks to aggregate")
    for solver, tasks in task_sets.items():
        if tasks != reference:
            raise MismatchedTaskSets(
                f"solver {solver!r} covers {sorted(tasks)}, expected {sorted(reference)}"
            )
    tasks = tuple(sorted(reference))

    task_ranks: dict[str, dict[str, int]] = {s: {} for s in solvers}
    for task in tasks:
        scores = [results[s][task].score for s in solvers]
        for solver, rank in zip(solvers, rank_scores(scores)):
            task_ranks[solver][task] = rank

    means: dict[str, dict[str, float]] = {}
    for solver in solvers:
        rows = [results[solver][task] for task in tasks]
        means[solver] = {
            "score": _mean(r.score for r in rows),
            "aup_d": _mean(r.aup_d for r in rows),
            "best_time": _mean(r.best_time for r in rows),
            "stop_time": _mean(r.stop_time for r in rows),
            "gain": _mean(r.gain for r in rows),
            "hit": hit_rate([r.hit for r in rows]),
        }
    mean_rank = {s: _mean(task_ranks[s][t] for t in tasks) for s in solvers}
    overall = dict(zip(solvers, rank_scores([means[s]["score"] for s in solvers])))
    return AggregateReport(
        tasks=tasks,
        solvers=solvers,
        per_task={s: dict(results[s]) for s in solvers},
        task_ranks=task_ranks,
        means=means,
        mean_rank=mean_rank,
        overall_rank=overall,
    )


def round_display(value: float, places: int = 4) -> float:
    """Display rounding only: 4 decimals, half-even. Internal math stays full precision."""
    from decimal import ROUND_HALF_EVEN, Decimal

    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_EVEN))


def _mean(values: Iterable[float]) -> float:
    items = list(values)
    return sum(items) / len(items)
