"""The cognitive solver: three-phase reasoning rounds with optimal stopping,
plus the two single-prompt baseline modes.

Mode "cognitive" runs Analysis -> Stopping Judgement -> Strategic Planning in
a fresh conversation each round. Mode "llm" keeps one growing conversation
and sends only the search prompt each round; "llm-es" prepends the
early-stopping prompt. A Stop decision is emitted only when the parsed
verdict says stop AND its confidence clears the threshold (threshold > 1
therefore disables stopping entirely, emulating always-run baselines).

Parse and transport failures are retried with a corrective instruction; a
round that stays unusable falls back to one TPE step so the study never
stalls. Context-budget overruns are surfaced, never hidden.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

from selfai.agent import prompts
from selfai.agent.parsing import (
    RecommendationParseError,
    parse_recommendations,
    parse_stop_answer,
)
from selfai.agent.prompts import Phase, PromptBundle
from selfai.agent.transport import ChatTimeout, EndpointError, Message, PlaybookError
from selfai.model import SolverDecision, Study
from selfai.solvers import SolverState, tpe_next

MODES = ("cognitive", "llm", "llm-es")


class Transport(Protocol):
    def complete(self, messages: Sequence[Message], phase: Phase | None = None) -> str: ...


@dataclass(frozen=True)
class TraceRecord:
    """One prompt/response exchange in the study's reasoning trace."""

    round: int
    phase: str
    prompt: str
    response: str
    parsed: dict
    elapsed_s: float = 0.0


class CognitiveSolver:
    """LLM-backed solver speaking the SolverDecision contract."""

    def __init__(
        self,
        mode: str,
        transport: Transport,
        *,
        stop_threshold: float = 0.7,
        max_parse_retries: int = 2,
        unexplored_cap: int = prompts.DEFAULT_UNEXPLORED_CAP,
        token_budget: int = prompts.DEFAULT_TOKEN_BUDGET,
    ) -> None:
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.mode = mode
        self.name = mode
        self.transport = transport
        self.stop_threshold = stop_threshold
        self.max_parse_retries = max_parse_retries
        self.unexplored_cap = unexplored_cap
        self.token_budget = token_budget
        self.round = 0
        self._trace: list[TraceRecord] = []
        self._conversation: list[Message] = []  # llm / llm-es modes only

    def drain_trace(self) -> list[TraceRecord]:
        records, self._trace = self._trace, []
        return records

    def decide(self, state: SolverState, study: Study, n_suggestions: int) -> SolverDecision:
        unexplored = [n for n in range(study.space.cardinality) if n not in state.explored]
        if not unexplored:
            return SolverDecision.stop(confidence=1.0, rationale="search space exhausted")
        self.round += 1
        n = min(max(1, n_suggestions), len(unexplored))
        if self.mode == "cognitive":
            return self._cognitive_round(state, study, unexplored, n)
        return self._baseline_round(state, study, unexplored, n)

    # -- cognitive mode -----------------------------------------------------

    def _cognitive_round(
        self, state: SolverState, study: Study, unexplored: list[int], n: int
    ) -> SolverDecision:
        messages: list[Message] = []
        if study.system_context:
            messages.append({"role": "system", "content": study.system_context})

        analysis = prompts.render_analysis_prompt(study)
        analysis_reply = self._exchange(messages, analysis)
        self._record(analysis, analysis_reply, {"phase": "analysis"})

        stop_bundle = prompts.render_stop_prompt(
            study, unexplored, cap=self.unexplored_cap, token_budget=self.token_budget
        )
        stop_reply = self._exchange(messages, stop_bundle)
        verdict = parse_stop_answer(stop_reply)
        self._record(
            stop_bundle,
            stop_reply,
            {
                "stop": verdict.stop,
                "confidence": verdict.confidence,
                "rule_findings": list(verdict.rule_findings),
                "flagged": verdict.flagged,
            },
        )
        if verdict.stop and verdict.confidence >= self.stop_threshold:
            return SolverDecision.stop(
                confidence=verdict.confidence, rationale="all stop rules met"
            )

        plan_bundle = prompts.render_plan_prompt(
            study, unexplored, n, cap=self.unexplored_cap, token_budget=self.token_budget
        )
        return self._plan_with_retries(messages, plan_bundle, state, study, n)

    # -- baseline modes -----------------------------------------------------

    def _baseline_round(
        self, state: SolverState, study: Study, unexplored: list[int], n: int
    ) -> SolverDecision:
        if not self._conversation and study.system_context:
            self._conversation.append({"role": "system", "content": study.system_context})

        if self.mode == "llm-es":
            stop_bundle = prompts.render_llmes_stop_prompt(
                study, unexplored, cap=self.unexplored_cap, token_budget=self.token_budget
            )
            stop_reply = self._exchange(self._conversation, stop_bundle)
            verdict = parse_stop_answer(stop_reply)
            self._record(
                stop_bundle,
                stop_reply,
                {"stop": verdict.stop, "confidence": verdict.confidence, "flagged": verdict.flagged},
            )
            if verdict.stop and verdict.confidence >= self.stop_threshold:
                return SolverDecision.stop(
                    confidence=verdict.confidence, rationale="early-stopping module"
                )

        search_bundle = prompts.render_llm_search_prompt(
            study, unexplored, n, cap=self.unexplored_cap, token_budget=self.token_budget
        )
        return self._plan_with_retries(self._conversation, search_bundle, state, study, n)

    # -- shared plumbing ----------------------------------------------------

    def _plan_with_retries(
        self,
        messages: list[Message],
        bundle: PromptBundle,
        state: SolverState,
        study: Study,
        n: int,
    ) -> SolverDecision:
        attempts = 1 + self.max_parse_retries
        prompt_text = bundle.user_text
        for attempt in range(attempts):
            try:
                reply = self._exchange(messages, bundle, override_text=prompt_text)
            except (EndpointError, ChatTimeout) as exc:
                self._record(bundle, "", {"error": str(exc)}, prompt_override=prompt_text)
                if attempt == attempts - 1:
                    return self._fallback(state, study, n, reason=str(exc))
                continue
            try:
                recs = parse_recommendations(reply, study.space, n, explored=state.explored)
            except RecommendationParseError as exc:
                self._record(
                    bundle, reply, {"error": type(exc).__name__, "detail": str(exc)},
                    prompt_override=prompt_text,
                )
                if attempt == attempts - 1:
                    return self._fallback(state, study, n, reason=str(exc))
                prompt_text = self._corrective(exc, n)
                continue
            self._record(
                bundle,
                reply,
                {"recommendations": [{"number": r.number, "params": r.config} for r in recs]},
                prompt_override=prompt_text,
            )
            return SolverDecision.suggest([r.config for r in recs])
        raise AssertionError("unreachable")

    def _fallback(self, state: SolverState, study: Study, n: int, reason: str) -> SolverDecision:
        decision = tpe_next(state, study.space, study.direction, n)
        self._trace.append(
            TraceRecord(
                round=self.round,
                phase="fallback",
                prompt="",
                response="",
                parsed={"fallback": "tpe", "reason": reason[:500]},
            )
        )
        return SolverDecision(
            kind=decision.kind,
            suggestions=decision.suggestions,
            confidence=decision.confidence,
            rationale=f"tpe fallback after unusable model replies: {reason[:200]}",
        )

    @staticmethod
    def _corrective(error: RecommendationParseError, n: int) -> str:
        return (
            f"Your previous reply could not be used ({type(error).__name__}: {error}). "
            f"Answer again following every rule. End with a RECOMMENDATIONS: block of exactly "
            f"{n} lines, one per pick, formatted as `trial <number>: <dim>=<value>, ...`, "
            f"using only unexplored configurations exactly as listed in the Search Space."
        )

    def _exchange(
        self, messages: list[Message], bundle: PromptBundle, override_text: str | None = None
    ) -> str:
        text = override_text if override_text is not None else bundle.user_text
        messages.append({"role": "user", "content": text})
        reply = self.transport.complete(messages, phase=bundle.phase)
        messages.append({"role": "assistant", "content": reply})
        return reply

    def _record(
        self, bundle: PromptBundle, response: str, parsed: dict, prompt_override: str | None = None
    ) -> None:
        latency = 0.0
        exchange = getattr(self.transport, "last_exchange", None)
        if exchange is not None and response:
            latency = exchange.latency_s
        self._trace.append(
            TraceRecord(
                round=self.round,
                phase=bundle.phase.value,
                prompt=prompt_override if prompt_override is not None else bundle.user_text,
                response=response,
                parsed=parsed,
                elapsed_s=latency,
            )
        )
