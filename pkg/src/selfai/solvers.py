"""Baseline solvers over tabulated spaces: exhaustive grid search and a
discrete Tree-structured Parzen Estimator, plus the uniform-random reference
used in comparative tests. All share the SolverDecision contract with the
cognitive agent and never re-propose an explored config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from selfai.model import Direction, SearchSpace, SolverDecision, Study


@dataclass
class SolverState:
    """Bookkeeping a stateless suggestion function needs: what was explored,
    with which outcome, and a seeded RNG for reproducibility."""

    explored: set[int] = field(default_factory=set)
    history: list[tuple[int, float]] = field(default_factory=list)  # (number, value)
    rng_seed: int = 0
    _rng: np.random.Generator | None = None

    @property
    def rng(self) -> np.random.Generator:
        if self._rng is None:
            self._rng = np.random.default_rng(self.rng_seed)
        return self._rng

    @classmethod
    def from_study(cls, study: Study, rng_seed: int = 0) -> SolverState:
        history = [(t.number, t.value) for t in study.completed]
        return cls(explored=set(study.explored_numbers), history=history, rng_seed=rng_seed)

    def observe(self, number: int, value: float) -> None:
        self.explored.add(number)
        self.history.append((number, value))

    def mark_submitted(self, number: int) -> None:
        self.explored.add(number)


def _unexplored(state: SolverState, space: SearchSpace) -> list[int]:
    return [n for n in range(space.cardinality) if n not in state.explored]


def grid_next(state: SolverState, space: SearchSpace, n_suggestions: int = 1) -> SolverDecision:
    """Suggest the lowest-numbered unexplored configs; Stop when none remain."""
    remaining = _unexplored(state, space)
    if not remaining:
        return SolverDecision.stop(confidence=1.0, rationale="search space exhausted")
    picks = remaining[: max(1, n_suggestions)]
    return SolverDecision.suggest([space.config_at(n) for n in picks])


def tpe_scores(
    history: list[tuple[int, float]],
    candidates: list[int],
    space: SearchSpace,
    direction: Direction,
    gamma: float = 0.25,
    alpha: float = 1.0,
) -> dict[int, Fraction]:
    """l(x)/g(x) for each candidate under per-dimension categorical Parzen
    estimators with additive smoothing alpha, as exact rationals so argmax
    ties cannot flip on float rounding.

    The good set is the top-gamma fraction of observations under the study
    direction (at least one, never all of them).
    """
    n_obs = len(history)
    n_good = max(1, math.ceil(gamma * n_obs))
    n_good = min(n_good, n_obs - 1)  # keep the bad set nonempty
    best_first = sorted(
        history,
        key=lambda item: (-item[1], item[0]) if direction is Direction.MAXIMIZE else (item[1], item[0]),
    )
    good = best_first[:n_good]
    bad = best_first[n_good:]
    smooth = Fraction(alpha)

    scores: dict[int, Fraction] = {}
    good_configs = [space.config_at(n) for n, _ in good]
    bad_configs = [space.config_at(n) for n, _ in bad]
    for number in candidates:
        config = space.config_at(number)
        odds = Fraction(1)
        for name, values in space.dimensions:
            k = len(values)
            good_count = sum(1 for c in good_configs if c[name] == config[name])
            bad_count = sum(1 for c in bad_configs if c[name] == config[name])
            l_d = (good_count + smooth) / (len(good) + smooth * k)
            g_d = (bad_count + smooth) / (len(bad) + smooth * k)
            odds *= l_d / g_d
        scores[number] = odds
    return scores


def tpe_next(
    state: SolverState,
    space: SearchSpace,
    direction: Direction,
    n_suggestions: int = 1,
    *,
    gamma: float = 0.25,
    alpha: float = 1.0,
    n_candidates: int = 24,
    n_startup: int = 5,
) -> SolverDecision:
    """One TPE round: uniform seeded draws during startup, then the argmax of
    l/g over a candidate subset of the unexplored configs.

    Deterministic given (table, seed, gamma, alpha, candidate count). Never
    self-stops before the space is exhausted.
    """
    remaining = _unexplored(state, space)
    if not remaining:
        return SolverDecision.stop(confidence=1.0, rationale="search space exhausted")
    n = min(max(1, n_suggestions), len(remaining))

    if len(state.history) < n_startup:
        picks = state.rng.choice(remaining, size=n, replace=False)
        return SolverDecision.suggest(
            [space.config_at(int(p)) for p in picks], rationale="startup: uniform draw"
        )

    if len(remaining) > n_candidates:
        drawn = state.rng.choice(remaining, size=n_candidates, replace=False)
        candidates = sorted(int(c) for c in drawn)
    else:
        candidates = remaining
    scores = tpe_scores(state.history, candidates, space, direction, gamma=gamma, alpha=alpha)
    ordered = sorted(candidates, key=lambda num: (-scores[num], num))
    return SolverDecision.suggest(
        [space.config_at(num) for num in ordered[:n]],
        rationale="argmax of l/g over candidate set",
    )


def random_next(state: SolverState, space: SearchSpace, n_suggestions: int = 1) -> SolverDecision:
    """Uniform seeded draw from the unexplored configs."""
    remaining = _unexplored(state, space)
    if not remaining:
        return SolverDecision.stop(confidence=1.0, rationale="search space exhausted")
    n = min(max(1, n_suggestions), len(remaining))
    picks = state.rng.choice(remaining, size=n, replace=False)
    return SolverDecision.suggest([space.config_at(int(p)) for p in picks])


class GridSearch:
    """Deterministic exhaustive sweep in config-number order."""

    name = "grid"

    def __init__(self) -> None:
        pass

    def decide(self, state: SolverState, study: Study, n_suggestions: int) -> SolverDecision:
        return grid_next(state, study.space, n_suggestions)


class TPESearch:
    """Discrete TPE (the BS baseline): categorical Parzen estimators over the
    tabulated space. Runs until the budget is exhausted."""

    name = "tpe"

    def __init__(self, gamma: float = 0.25, alpha: float = 1.0, n_candidates: int = 24, n_startup: int = 5) -> None:
        self.gamma = gamma
        self.alpha = alpha
        self.n_candidates = n_candidates
        self.n_startup = n_startup

    def decide(self, state: SolverState, study: Study, n_suggestions: int) -> SolverDecision:
        return tpe_next(
            state,
            study.space,
            study.direction,
            n_suggestions,
            gamma=self.gamma,
            alpha=self.alpha,
            n_candidates=self.n_candidates,
            n_startup=self.n_startup,
        )


class RandomSearch:
    """Uniform random reference solver (comparative tests only)."""

    name = "random"

    def decide(self, state: SolverState, study: Study, n_suggestions: int) -> SolverDecision:
        return random_next(state, study.space, n_suggestions)
