"""Phase prompt templates and rendering.

Five prompt kinds: the three cognitive phases (trajectory analysis, stopping
judgement, strategic planning) and the two baseline modes (plain search,
search + early stopping). Rendering is deterministic: a fixed study state
always produces byte-identical text, so reasoning traces diff cleanly.

Serialization formats are part of the contract:
  completed trial   ->  #<number> {dim=value, ...} -> <metric>=<value>
  unexplored config ->  #<number> {dim=value, ...}
Long unexplored lists are truncated at a configurable cap with an explicit
"... and N more" annotation; if even the truncated prompt would blow the
model's context budget, rendering fails loudly instead of silently clipping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from selfai.model import SearchSpace, Study, TrialRecord, TrialStatus

DEFAULT_UNEXPLORED_CAP = 200
DEFAULT_TOKEN_BUDGET = 100_000
_CHARS_PER_TOKEN = 4  # coarse but direction-safe estimate


class Phase(str, Enum):
    ANALYSIS = "analysis"
    STOP_JUDGEMENT = "stop_judgement"
    PLANNING = "planning"
    BASELINE_SEARCH = "baseline_search"
    BASELINE_STOP = "baseline_stop"


class ContextBudgetExceeded(RuntimeError):
    """Prompt exceeds the model's context budget even after truncation."""


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    phase: Phase
    placeholders_filled: dict[str, str] = field(default_factory=dict)


ANALYSIS_TEMPLATE = """Completed trials:

{completed_trials}

Task 1: Analyze the current task

Understand current tasks, basic ideas, objectives, and hyperparameters.

Task 2: Analysis of Completed Trials

Step 1: Summarize performance metrics for completed trials.

Step 2: Evaluate performance trends for hyperparameters.

Step 3: Highlight promising hyperparameter combinations."""


STOP_TEMPLATE = """Completed trials:

{completed_trials}

The following **Search Space** contains **unexplored** trials.
{trials}

Instructions:
Task 1: Review Analysis of Completed Trials (trial analysis, performance trends, highlights, and other insights)

Task 2: Decide Whether to Stop Optimization

Based on the above analysis and **Completed Trials**, determine whether the optimization process should be stopped.

Carefully analyze each of the following stop rules and provide a short (1-2 sentences) justification for whether it is met:

1. Have all promising configurations identified based on performance trends been tested?

2. Is it unlikely that unexplored configurations will perform better based on the observed trends and the law of diminishing returns?

3. Has the best metric improved significantly?

Step 2: Decide whether **all** conditions are met.

If **all** criteria in Step 1 are met, Answer: Yes, with confidence score: <your confidence in [0, 1]>. Otherwise, Answer: No with confidence score: <your confidence in [0, 1]>."""


_RULES_BLOCK = """Rules:

1. "params" MUST include:

  {hyper_names}

2. All selected `params` must match exactly with the provided **Search Space**. Do NOT leave out any key.

3. Use the analysis in **Task 1** (trial analysis, performance trends, highlights, and other insights) to guide selection.

4. Based on the above analysis, explore under-explored regions only when there is clear evidence of potential performance gain.

5. Do not mix, modify, or create new values.

6. You MUST not output any JSON blocks in this part.

7. You MUST provide reasoning for each recommendation.

After your reasoning, end your reply with a final block starting with the line `RECOMMENDATIONS:` followed by one line per pick, formatted exactly as `trial <number>: <dim>=<value>, <dim>=<value>, ...`."""


PLAN_TEMPLATE = """Instructions:

Task 1: Review Analysis of All Completed Trials

Completed trials:

{completed_trials}

The following **Search Space** contains **unexplored** trials:

{trials}

Instructions:

Task 2: Optimization Recommendation

Recommend exactly {n_jobs} promising trials from the provided **Search Space** (include both number and params).

""" + _RULES_BLOCK


# The baseline search prompt carries no completed-trials block of its own:
# prior results reach the model through the accumulated conversation history.
LLM_SEARCH_TEMPLATE = """Instructions:

**Search Space** (Numbering starts from 0, excluding Completed Trials):
{trials}

Task 1: Optimization Recommendation
Recommend exactly {n_jobs} promising trials from the provided **Search Space** (include both number and params).

""" + _RULES_BLOCK


LLMES_STOP_TEMPLATE = """Completed trials:

{completed_trials}

The following **Search Space** contains **unexplored** trials.
{trials}

If the optimization process should be stopped, Answer: Yes with confidence score: <your confidence in [0, 1]>. Otherwise, Answer: No with confidence score: <your confidence in [0, 1]>.

Finally, you MUST output 'Answer: No/Yes' with confidence score: <your confidence in [0, 1]>."""


def format_value(value: object) -> str:
    return str(value)


def format_config(config: dict) -> str:
    inner = ", ".join(f"{name}={format_value(value)}" for name, value in config.items())
    return "{" + inner + "}"


def completed_trials_block(study: Study) -> str:
    """One line per trial in ordinal order; failed trials carry the reason."""
    lines = [
        f"#{t.number} {format_config(t.config)} -> {study.metric}={format_value(t.value)}"
        for t in study.completed
    ]
    failed = [t for t in study.trials if t.status is TrialStatus.FAILED]
    lines += [
        f"#{t.number} {format_config(t.config)} -> FAILED({t.failure or 'unknown'})"
        for t in sorted(failed, key=lambda t: t.trial_id)
    ]
    return "\n".join(lines)


def unexplored_block(space: SearchSpace, numbers: list[int], cap: int = DEFAULT_UNEXPLORED_CAP) -> str:
    shown = numbers[:cap]
    lines = [f"#{n} {format_config(space.config_at(n))}" for n in shown]
    hidden = len(numbers) - len(shown)
    if hidden > 0:
        lines.append(f"... and {hidden} more unexplored configs not listed")
    return "\n".join(lines)


def _check_budget(text: str, token_budget: int) -> None:
    estimate = len(text) // _CHARS_PER_TOKEN
    if estimate > token_budget:
        raise ContextBudgetExceeded(
            f"prompt estimates {estimate} tokens, budget is {token_budget}"
        )


def render_analysis_prompt(study: Study) -> PromptBundle:
    filled = {"completed_trials": completed_trials_block(study)}
    return PromptBundle(
        system_text=study.system_context,
        user_text=ANALYSIS_TEMPLATE.format(**filled),
        phase=Phase.ANALYSIS,
        placeholders_filled=filled,
    )


def render_stop_prompt(
    study: Study,
    unexplored: list[int],
    *,
    cap: int = DEFAULT_UNEXPLORED_CAP,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> PromptBundle:
    filled = {
        "completed_trials": completed_trials_block(study),
        "trials": unexplored_block(study.space, unexplored, cap),
    }
    text = STOP_TEMPLATE.format(**filled)
    _check_budget(text, token_budget)
    return PromptBundle(study.system_context, text, Phase.STOP_JUDGEMENT, filled)


def render_plan_prompt(
    study: Study,
    unexplored: list[int],
    n_jobs: int,
    *,
    cap: int = DEFAULT_UNEXPLORED_CAP,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> PromptBundle:
    filled = {
        "completed_trials": completed_trials_block(study),
        "trials": unexplored_block(study.space, unexplored, cap),
        "n_jobs": str(n_jobs),
        "hyper_names": ", ".join(study.space.names),
    }
    text = PLAN_TEMPLATE.format(**filled)
    _check_budget(text, token_budget)
    return PromptBundle(study.system_context, text, Phase.PLANNING, filled)


def render_llm_search_prompt(
    study: Study,
    unexplored: list[int],
    n_jobs: int,
    *,
    cap: int = DEFAULT_UNEXPLORED_CAP,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> PromptBundle:
    filled = {
        "trials": unexplored_block(study.space, unexplored, cap),
        "n_jobs": str(n_jobs),
        "hyper_names": ", ".join(study.space.names),
    }
    text = LLM_SEARCH_TEMPLATE.format(**filled)
    _check_budget(text, token_budget)
    return PromptBundle(study.system_context, text, Phase.BASELINE_SEARCH, filled)


def render_llmes_stop_prompt(
    study: Study,
    unexplored: list[int],
    *,
    cap: int = DEFAULT_UNEXPLORED_CAP,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> PromptBundle:
    filled = {
        "completed_trials": completed_trials_block(study),
        "trials": unexplored_block(study.space, unexplored, cap),
    }
    text = LLMES_STOP_TEMPLATE.format(**filled)
    _check_budget(text, token_budget)
    return PromptBundle(study.system_context, text, Phase.BASELINE_STOP, filled)
