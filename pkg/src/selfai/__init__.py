"""SelfAI: autonomous hyperparameter-search orchestration.

A study pairs a discrete search space with a solver (grid, TPE, or an
LLM-driven cognitive agent with optimal stopping) and an execution backend
(tabulated benchmark lookup or subprocess jobs). The experiment manager is
event-sourced, so studies survive crashes and replay deterministically.
"""

from selfai.model import (
    Direction,
    Lifecycle,
    SearchSpace,
    SolverDecision,
    Study,
    TrialConfig,
    TrialRecord,
    TrialStatus,
)

__version__ = "0.1.0"

__all__ = [
    "Direction",
    "Lifecycle",
    "SearchSpace",
    "SolverDecision",
    "Study",
    "TrialConfig",
    "TrialRecord",
    "TrialStatus",
    "__version__",
]
