from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selfai.agent.prompts import Phase
from selfai.agent.solver import CognitiveSolver
from selfai.agent.transport import PlaybookEntry, PlaybookError, ScriptedTransport
from selfai.model import DecisionKind, Direction, SearchSpace, Study
from selfai.solvers import SolverState

SPACE = SearchSpace.from_dict({"lr": [0.1, 0.01], "units": [32, 64]})


def study(**kwargs) -> Study:
    defaults = dict(
        id="s",
        space=SPACE,
        direction=Direction.MAXIMIZE,
        max_trials=4,
        n_jobs=2,
        solver="cognitive",
        system_context="You are a tuning assistant.",
    )
    defaults.update(kwargs)
    return Study(**defaults)


def rec_lines(numbers: list[int]) -> str:
    lines = ["Reasoning: these sit near the best-observed region.", "RECOMMENDATIONS:"]
    for n in numbers:
        config = SPACE.config_at(n)
        lines.append("trial %d: lr=%s, units=%s" % (n, config["lr"], config["units"]))
    return "\n".join(lines)


NO_VERDICT = "1. Not met.\n2. Not met.\n3. Not met.\nAnswer: No with confidence score: 0.3"


def yes_verdict(confidence: float) -> str:
    return (
        "1. Met.\n2. Met.\n3. Met.\n"
        f"Answer: Yes, with confidence score: {confidence}"
    )


class TestCognitiveMode:
    def test_continue_round_yields_validated_suggestions(self):
        transport = ScriptedTransport(
            [
                PlaybookEntry(Phase.ANALYSIS, "trend: higher units help"),
                PlaybookEntry(Phase.STOP_JUDGEMENT, NO_VERDICT),
                PlaybookEntry(Phase.PLANNING, rec_lines([1, 3])),
            ]
        )
        solver = CognitiveSolver("cognitive", transport)
        decision = solver.decide(SolverState(), study(), 2)
        assert decision.kind is DecisionKind.SUGGEST
        assert [SPACE.index_of(c) for c in decision.suggestions] == [1, 3]

    def test_confident_yes_stops(self):
        transport = ScriptedTransport(
            [
                PlaybookEntry(Phase.ANALYSIS, "saturated"),
                PlaybookEntry(Phase.STOP_JUDGEMENT, yes_verdict(0.95)),
            ]
        )
        solver = CognitiveSolver("cognitive", transport, stop_threshold=0.7)
        decision = solver.decide(SolverState(explored={0}, history=[(0, 1.0)]), study(), 2)
        assert decision.kind is DecisionKind.STOP
        assert decision.confidence == pytest.approx(0.95)

    def test_low_confidence_yes_continues_to_planning(self):
        transport = ScriptedTransport(
            [
                PlaybookEntry(Phase.ANALYSIS, "maybe saturated"),
                PlaybookEntry(Phase.STOP_JUDGEMENT, yes_verdict(0.5)),
                PlaybookEntry(Phase.PLANNING, rec_lines([2])),
            ]
        )
        solver = CognitiveSolver("cognitive", transport, stop_threshold=0.7)
        decision = solver.decide(SolverState(), study(), 1)
        assert decision.kind is DecisionKind.SUGGEST

    def test_threshold_above_one_never_stops(self):
        transport = ScriptedTransport(
            [
                PlaybookEntry(Phase.ANALYSIS, "a"),
                PlaybookEntry(Phase.STOP_JUDGEMENT, yes_verdict(1.0)),
                PlaybookEntry(Phase.PLANNING, rec_lines([0])),
            ]
        )
        solver = CognitiveSolver("cognitive", transport, stop_threshold=1.01)
        decision = solver.decide(SolverState(), study(), 1)
        assert decision.kind is DecisionKind.SUGGEST

    def test_exhausted_space_stops_without_calling_model(self):
        transport = ScriptedTransport([PlaybookEntry(Phase.ANALYSIS, "never used")])
        solver = CognitiveSolver("cognitive", transport)
        state = SolverState(explored={0, 1, 2, 3})
        decision = solver.decide(state, study(), 1)
        assert decision.kind is DecisionKind.STOP
        assert transport.cursor == 0

    def test_invalid_reply_retries_with_corrective_then_succeeds(self):
        transport = ScriptedTransport(
            [
                PlaybookEntry(Phase.ANALYSIS, "a"),
                PlaybookEntry(Phase.STOP_JUDGEMENT, NO_VERDICT),
                PlaybookEntry(Phase.PLANNING, "trial 0: lr=0.5, units=32"),  # rule-5 violation
                PlaybookEntry(Phase.PLANNING, rec_lines([2])),
            ]
        )
        solver = CognitiveSolver("cognitive", transport)
        decision = solver.decide(SolverState(), study(), 1)
        assert decision.kind is DecisionKind.SUGGEST
        assert [SPACE.index_of(c) for c in decision.suggestions] == [2]
        trace = solver.drain_trace()
        errors = [r for r in trace if "error" in r.parsed]
        assert errors and errors[0].parsed["error"] == "InvalidValue"

    def test_terminal_parse_failure_falls_back_to_tpe(self):
        transport = ScriptedTransport(
            [
                PlaybookEntry(Phase.ANALYSIS, "a"),
                PlaybookEntry(Phase.STOP_JUDGEMENT, NO_VERDICT),
                PlaybookEntry(Phase.PLANNING, "garbage"),
                PlaybookEntry(Phase.PLANNING, "still garbage"),
                PlaybookEntry(Phase.PLANNING, "yet more garbage"),
            ]
        )
        solver = CognitiveSolver("cognitive", transport, max_parse_retries=2)
        state = SolverState(explored={0}, history=[(0, 1.0)], rng_seed=5)
        decision = solver.decide(state, study(), 1)
        assert decision.kind is DecisionKind.SUGGEST
        assert "fallback" in decision.rationale
        number = SPACE.index_of(decision.suggestions[0])
        assert number not in state.explored

    def test_playbook_exhaustion_propagates(self):
        transport = ScriptedTransport([PlaybookEntry(Phase.ANALYSIS, "only entry")])
        solver = CognitiveSolver("cognitive", transport)
        with pytest.raises(PlaybookError):
            solver.decide(SolverState(), study(), 1)

    def test_trace_records_all_three_phases(self):
        transport = ScriptedTransport(
            [
                PlaybookEntry(Phase.ANALYSIS, "a"),
                PlaybookEntry(Phase.STOP_JUDGEMENT, NO_VERDICT),
                PlaybookEntry(Phase.PLANNING, rec_lines([1])),
            ]
        )
        solver = CognitiveSolver("cognitive", transport)
        solver.decide(SolverState(), study(), 1)
        phases = [r.phase for r in solver.drain_trace()]
        assert phases == ["analysis", "stop_judgement", "planning"]


class TestBaselineModes:
    def test_llm_mode_single_prompt_suggests(self):
        transport = ScriptedTransport([PlaybookEntry(Phase.BASELINE_SEARCH, rec_lines([3]))])
        solver = CognitiveSolver("llm", transport)
        decision = solver.decide(SolverState(), study(solver="llm"), 1)
        assert decision.kind is DecisionKind.SUGGEST
        assert [SPACE.index_of(c) for c in decision.suggestions] == [3]

    def test_llm_es_runs_stop_prompt_first(self):
        transport = ScriptedTransport(
            [
                PlaybookEntry(Phase.BASELINE_STOP, "Answer: Yes with confidence score: 0.9"),
            ]
        )
        solver = CognitiveSolver("llm-es", transport)
        decision = solver.decide(SolverState(explored={0}, history=[(0, 1.0)]), study(solver="llm-es"), 1)
        assert decision.kind is DecisionKind.STOP

    def test_llm_es_continues_when_not_confident(self):
        transport = ScriptedTransport(
            [
                PlaybookEntry(Phase.BASELINE_STOP, "Answer: No with confidence score: 0.9"),
                PlaybookEntry(Phase.BASELINE_SEARCH, rec_lines([2])),
            ]
        )
        solver = CognitiveSolver("llm-es", transport)
        decision = solver.decide(SolverState(), study(solver="llm-es"), 1)
        assert decision.kind is DecisionKind.SUGGEST

    def test_llm_conversation_accumulates_rounds(self):
        transport = ScriptedTransport(
            [
                PlaybookEntry(Phase.BASELINE_SEARCH, rec_lines([0])),
                PlaybookEntry(Phase.BASELINE_SEARCH, rec_lines([1])),
            ]
        )
        solver = CognitiveSolver("llm", transport)
        state = SolverState()
        solver.decide(state, study(solver="llm"), 1)
        state.mark_submitted(0)
        state.observe(0, 0.9)
        solver.decide(state, study(solver="llm"), 1)
        # system + 2 * (user prompt + assistant reply)
        assert len(solver._conversation) == 5


@given(st.data())
@settings(max_examples=40, deadline=None)
def test_adversarial_replies_never_yield_invalid_or_explored_configs(data):
    explored = set(data.draw(st.lists(st.integers(0, 3), max_size=3)))
    if len(explored) == 4:
        explored.discard(0)
    reply_kind = data.draw(st.sampled_from(["garbage", "explored", "foreign", "valid"]))
    remaining = [n for n in range(4) if n not in explored]
    if reply_kind == "garbage":
        reply = data.draw(st.text(max_size=80))
    elif reply_kind == "explored" and explored:
        reply = rec_lines(sorted(explored))
    elif reply_kind == "foreign":
        reply = "RECOMMENDATIONS:\ntrial 0: lr=9.9, units=77"
    else:
        reply = rec_lines(remaining[:1])
    transport = ScriptedTransport(
        [
            PlaybookEntry(Phase.ANALYSIS, "a"),
            PlaybookEntry(Phase.STOP_JUDGEMENT, NO_VERDICT),
            PlaybookEntry(Phase.PLANNING, reply),
            PlaybookEntry(Phase.PLANNING, reply),
            PlaybookEntry(Phase.PLANNING, reply),
        ]
    )
    solver = CognitiveSolver("cognitive", transport)
    state = SolverState(explored=set(explored), history=[(n, 1.0) for n in explored], rng_seed=1)
    decision = solver.decide(state, study(), 1)
    assert decision.kind is DecisionKind.SUGGEST
    for config in decision.suggestions:
        number = SPACE.index_of(config)  # raises if config not in space
        assert number not in explored
