"""LLM-driven search: phase prompts, answer parsers, chat transport and the
cognitive solver loop (trajectory analysis, stopping judgement, planning)."""

from selfai.agent.parsing import (
    InvalidValue,
    MissingDimension,
    Recommendation,
    RecommendationParseError,
    StopVerdict,
    WrongCount,
    parse_recommendations,
    parse_stop_answer,
)
from selfai.agent.prompts import (
    ContextBudgetExceeded,
    Phase,
    PromptBundle,
    render_analysis_prompt,
    render_llm_search_prompt,
    render_llmes_stop_prompt,
    render_plan_prompt,
    render_stop_prompt,
)
from selfai.agent.solver import CognitiveSolver
from selfai.agent.transport import (
    BudgetExceeded,
    ChatClient,
    ChatExchange,
    ChatTimeout,
    EndpointError,
    PlaybookError,
    ScriptedTransport,
    load_playbook,
)

__all__ = [
    "BudgetExceeded",
    "ChatClient",
    "ChatExchange",
    "ChatTimeout",
    "CognitiveSolver",
    "ContextBudgetExceeded",
    "EndpointError",
    "InvalidValue",
    "MissingDimension",
    "Phase",
    "PlaybookError",
    "PromptBundle",
    "Recommendation",
    "RecommendationParseError",
    "ScriptedTransport",
    "StopVerdict",
    "WrongCount",
    "load_playbook",
    "parse_recommendations",
    "parse_stop_answer",
    "render_analysis_prompt",
    "render_llm_search_prompt",
    "render_llmes_stop_prompt",
    "render_plan_prompt",
    "render_stop_prompt",
]
