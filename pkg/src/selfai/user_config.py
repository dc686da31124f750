"""Study configuration documents: the two-role YAML template that turns a
researcher's summarized intent into a standardized, reproducible study.

The document has exactly two roles. The system block carries the model id,
role-play description, task, basic idea, search space, reference link and
instruction; the user block carries max_trials and an optional seed list of
forced initial trials. Unknown fields are preserved on parse and written
back on emit, so parse(emit(config)) round-trips.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import yaml

from selfai.model import SearchSpace


class EmptySummary(ValueError):
    pass


class MalformedDocument(ValueError):
    def __init__(self, message: str, path: str = "") -> None:
        super().__init__(f"{message}" + (f" (at {path})" if path else ""))
        self.path = path


class EmptySearchSpace(MalformedDocument):
    pass


class BadMaxTrials(MalformedDocument):
    pass


CONFIG_TEMPLATE = """\
# Template for Configuration Interaction
# to convert Idea Interaction into YAML format
- role: system
  content:
    model: $modelName
    description: You are a $role specializing in
                studying $taskName. Please provide
                professional and detailed answers.
    task: $taskName
    basic_idea: $basic_idea
    search_space:
      $hyper_name1: []
      $hyper_name2: []
      ...
    link: $paperLink
    instruction: Complete instructions under limited trials.
- role: user
  content:
    max_trials: $maxTrials
    trials: []
"""

CONFIG_PROMPT_PREFIX = "Please fill out the content following the YAML format:"


def render_config_prompt(summary: str) -> str:
    """Embed the researcher's summarized intent above the YAML template.

    The $-placeholders stay untouched: filling them is the model's job.
    """
    if not summary or not summary.strip():
        raise EmptySummary("summary text must be nonempty")
    return f"{summary.strip()}\n\n{CONFIG_PROMPT_PREFIX}\n\n{CONFIG_TEMPLATE}"


@dataclass(frozen=True)
class StudyConfig:
    """Parsed, normalized study configuration."""

    model: str
    description: str
    task: str
    basic_idea: str
    search_space: dict[str, list[Any]]
    link: str
    instruction: str
    max_trials: int
    trials: list[dict[str, Any]] = field(default_factory=list)
    extra_system: dict[str, Any] = field(default_factory=dict)
    extra_user: dict[str, Any] = field(default_factory=dict)

    def space(self) -> SearchSpace:
        return SearchSpace.from_dict(self.search_space)

    def system_text(self) -> str:
        """The system-role content as YAML; becomes the study's system context."""
        block = {
            "model": self.model,
            "description": self.description,
            "task": self.task,
            "basic_idea": self.basic_idea,
            "search_space": self.search_space,
            "link": self.link,
            "instruction": self.instruction,
            **self.extra_system,
        }
        return yaml.safe_dump(block, sort_keys=False, default_flow_style=False)


def _normalize_scalar(value: Any, path: str) -> Any:
    # YAML already types ints/floats/strings; a literal null is folded into
    # the opaque categorical token "None" (values are tokens, never nulls).
    if value is None:
        return "None"
    if isinstance(value, (int, float, str, bool)):
        return value
    raise MalformedDocument(f"unsupported value {value!r}", path)


def parse_config(text: str) -> StudyConfig:
    """Parse a two-role configuration document into a StudyConfig."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise MalformedDocument(f"not valid YAML: {exc}")
    if not isinstance(raw, list):
        raise MalformedDocument("document must be a list of role blocks")
    blocks: dict[str, Mapping[str, Any]] = {}
    for i, item in enumerate(raw):
        if not isinstance(item, Mapping) or "role" not in item or "content" not in item:
            raise MalformedDocument("each entry needs role and content", path=f"[{i}]")
        blocks[str(item["role"])] = item["content"] or {}
    if set(blocks) != {"system", "user"}:
        raise MalformedDocument(f"roles must be exactly system and user, got {sorted(blocks)}")

    system = dict(blocks["system"])
    user = dict(blocks["user"])

    raw_space = system.pop("search_space", None)
    if not isinstance(raw_space, Mapping) or not raw_space:
        raise EmptySearchSpace("search_space must be a nonempty mapping", path="system.search_space")
    search_space: dict[str, list[Any]] = {}
    for name, values in raw_space.items():
        path = f"system.search_space.{name}"
        if not isinstance(values, list) or not values:
            raise EmptySearchSpace(f"dimension {name!r} needs a nonempty list", path=path)
        search_space[str(name)] = [_normalize_scalar(v, path) for v in values]

    max_trials = user.pop("max_trials", None)
    if not isinstance(max_trials, int) or isinstance(max_trials, bool) or max_trials < 1:
        raise BadMaxTrials(f"max_trials must be a positive integer, got {max_trials!r}", path="user.max_trials")

    trials_raw = user.pop("trials", []) or []
    if not isinstance(trials_raw, list):
        raise MalformedDocument("trials must be a list", path="user.trials")
    trials = []
    for i, entry in enumerate(trials_raw):
        if not isinstance(entry, Mapping):
            raise MalformedDocument("trial seeds must be mappings", path=f"user.trials[{i}]")
        trials.append({str(k): _normalize_scalar(v, f"user.trials[{i}].{k}") for k, v in entry.items()})

    # Accept the template's historical misspelling of "instruction".
    instruction = system.pop("instruction", system.pop("instrustion", ""))

    known = {
        "model": str(system.pop("model", "")),
        "description": str(system.pop("description", "")),
        "task": str(system.pop("task", "")),
        "basic_idea": str(system.pop("basic_idea", "")),
        "link": str(system.pop("link", "")),
        "instruction": str(instruction),
    }
    return StudyConfig(
        search_space=search_space,
        max_trials=max_trials,
        trials=trials,
        extra_system=system,
        extra_user=user,
        **known,
    )


def emit_config(config: StudyConfig) -> str:
    """Serialize a StudyConfig back to the two-role YAML document."""
    document = [
        {
            "role": "system",
            "content": {
                "model": config.model,
                "description": config.description,
                "task": config.task,
                "basic_idea": config.basic_idea,
                "search_space": config.search_space,
                "link": config.link,
                "instruction": config.instruction,
                **config.extra_system,
            },
        },
        {
            "role": "user",
            "content": {
                "max_trials": config.max_trials,
                "trials": config.trials,
                **config.extra_user,
            },
        },
    ]
    return yaml.safe_dump(document, sort_keys=False, default_flow_style=False)


def config_via_chat(summary: str, chat_client) -> StudyConfig:
    """Convenience pipeline: render the prompt, ask the model, parse the reply.

    The returned config is a draft: a human reviews it before any study runs.
    """
    prompt = render_config_prompt(summary)
    reply = chat_client.complete([{"role": "user", "content": prompt}])
    text = _strip_code_fences(reply)
    return parse_config(text)


def _strip_code_fences(reply: str) -> str:
    lines = reply.strip().splitlines()
    if lines and lines[0].startswith("```"):
        lines = lines[1:]
        if lines and lines[-1].startswith("```"):
            lines = lines[:-1]
    return "\n".join(lines)
