from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selfai.user_config import (
    BadMaxTrials,
    EmptySearchSpace,
    EmptySummary,
    MalformedDocument,
    StudyConfig,
    emit_config,
    parse_config,
    render_config_prompt,
)

BOSTON_DOC = """\
- role: system
  content:
    model: gpt-4o-mini
    description: You are a machine learning engineer specializing in
      studying regression on housing prices. Please provide
      professional and detailed answers.
    task: Boston house pricing prediction
    basic_idea: Tune a random forest regressor over a fixed grid.
    search_space:
      n-estimators: [100, 200, 300]
      max-depth: [None, 10, 20]
      min-samples-split: [2, 5, 10]
      min-samples-leaf: [1, 2, 5]
      max-features: ["sqrt", "log2"]
    link: https://example.org/boston
    instruction: Complete instructions under limited trials.
- role: user
  content:
    max_trials: 162
    trials: []
"""


class TestRenderPrompt:
    def test_summary_embedded_above_template(self):
        prompt = render_config_prompt("tune random forest on Boston")
        assert prompt.startswith("tune random forest on Boston")
        assert "Please fill out the content following the YAML format:" in prompt

    def test_dollar_placeholders_left_untouched(self):
        prompt = render_config_prompt("x")
        assert "$maxTrials" in prompt
        assert "$modelName" in prompt

    def test_empty_summary_rejected(self):
        with pytest.raises(EmptySummary):
            render_config_prompt("   ")


class TestParseConfig:
    def test_boston_document_five_dimensions_cardinality_162(self):
        config = parse_config(BOSTON_DOC)
        assert len(config.search_space) == 5
        assert config.space().cardinality == 162
        assert config.max_trials == 162
        # YAML's plain None is the opaque categorical token, not a null
        assert config.search_space["max-depth"][0] == "None"

    def test_zero_max_trials_rejected(self):
        with pytest.raises(BadMaxTrials):
            parse_config(BOSTON_DOC.replace("max_trials: 162", "max_trials: 0"))

    def test_empty_dimension_rejected(self):
        with pytest.raises(EmptySearchSpace):
            parse_config(BOSTON_DOC.replace("[100, 200, 300]", "[]"))

    def test_missing_role_rejected(self):
        with pytest.raises(MalformedDocument):
            parse_config("- role: system\n  content:\n    search_space: {a: [1]}\n")

    def test_not_yaml_rejected(self):
        with pytest.raises(MalformedDocument):
            parse_config("::: not yaml :::")

    def test_misspelled_instruction_key_accepted(self):
        doc = BOSTON_DOC.replace("instruction:", "instrustion:")
        config = parse_config(doc)
        assert config.instruction == "Complete instructions under limited trials."

    def test_unknown_fields_preserved(self):
        doc = BOSTON_DOC.replace("    link:", "    budget_gpus: 4\n    link:")
        config = parse_config(doc)
        assert config.extra_system["budget_gpus"] == 4
        assert "budget_gpus" in emit_config(config)

    def test_system_text_contains_search_space(self):
        config = parse_config(BOSTON_DOC)
        assert "search_space" in config.system_text()
        assert "n-estimators" in config.system_text()


class TestRoundTrip:
    def test_boston_roundtrip(self):
        config = parse_config(BOSTON_DOC)
        assert parse_config(emit_config(config)) == config

    @given(st.data())
    @settings(max_examples=50, deadline=None)
    def test_roundtrip_property(self, data):
        n_dims = data.draw(st.integers(1, 4))
        space = {}
        for i in range(n_dims):
            kind = data.draw(st.sampled_from(["int", "float", "str"]))
            size = data.draw(st.integers(1, 4))
            if kind == "int":
                values = sorted(data.draw(st.sets(st.integers(-100, 100), min_size=size, max_size=size)))
            elif kind == "float":
                values = sorted(
                    data.draw(st.sets(st.integers(1, 10_000), min_size=size, max_size=size))
                )
                values = [v / 100 for v in values]
            else:
                values = sorted(
                    data.draw(
                        st.sets(
                            st.text("abcdefgh", min_size=1, max_size=6),
                            min_size=size,
                            max_size=size,
                        )
                    )
                )
            space[f"dim-{i}"] = list(values)
        config = StudyConfig(
            model="m",
            description="d",
            task="t",
            basic_idea="b",
            search_space=space,
            link="l",
            instruction="i",
            max_trials=data.draw(st.integers(1, 50)),
            trials=[],
        )
        assert parse_config(emit_config(config)) == config
