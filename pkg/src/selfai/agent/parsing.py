"""Parsers for model answers: the stop verdict and trial recommendations.

Both parsers are defensive. An unreadable stop answer fails safe toward
continuing the search; unreadable or rule-violating recommendations raise a
typed error so the caller can re-prompt with a corrective instruction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from selfai.model import SearchSpace, TrialConfig


@dataclass(frozen=True)
class StopVerdict:
    stop: bool
    confidence: float
    rule_findings: tuple[bool, bool, bool]
    raw_text: str
    flagged: bool = False  # parse failed or findings contradicted the answer


@dataclass(frozen=True)
class Recommendation:
    number: int
    config: TrialConfig
    reasoning: str = ""


class RecommendationParseError(ValueError):
    """Base for recommendation failures; triggers the re-prompt policy."""


class InvalidValue(RecommendationParseError):
    """A param value is not a member of its dimension's candidate list."""


class MissingDimension(RecommendationParseError):
    """A recommendation's params do not cover the space's dimension names."""


class WrongCount(RecommendationParseError):
    """Fewer (or no) valid, novel recommendations than requested."""


_ANSWER_RE = re.compile(r"answer\s*:?\s*\**\s*(yes|no)\b", re.IGNORECASE)
_CONFIDENCE_RE = re.compile(r"confidence\s*(?:score)?\s*[:=]?\s*\**\s*([0-9]*\.?[0-9]+)", re.IGNORECASE)
# "unlikely" is deliberately not a negative marker: it is the affirmative
# wording of stop rule 2. Only explicit denials count as negative.
_NEGATIVE_RE = re.compile(
    r"\bnot\s+met\b|\bnot\s+satisfied\b|\bunmet\b|^\s*(?:rule\s*)?\d\s*[.):\-]\s*\**no\b",
    re.IGNORECASE,
)
_POSITIVE_RE = re.compile(r"\bmet\b|\byes\b|\bsatisfied\b|\bfulfilled\b", re.IGNORECASE)


def parse_stop_answer(text: str) -> StopVerdict:
    """Extract the final Answer: Yes/No and its confidence score.

    The LAST "Answer: Yes|No" occurrence wins (models often restate the
    question first); confidence is the nearest following "confidence score:
    <number>", clamped to [0, 1]. Per-rule justifications are scanned for
    explicit verdicts; a clearly negative rule finding downgrades a Yes to
    continue. Anything unparseable yields (stop=False, confidence=0, flagged).
    """
    matches = list(_ANSWER_RE.finditer(text))
    if not matches:
        return StopVerdict(False, 0.0, (False, False, False), text, flagged=True)
    final = matches[-1]
    answered_yes = final.group(1).lower() == "yes"

    confidence = 0.0
    conf_match = _CONFIDENCE_RE.search(text, final.end())
    if conf_match is None:  # tolerate "confidence ... Answer:" orderings
        tail_matches = list(_CONFIDENCE_RE.finditer(text))
        conf_match = tail_matches[-1] if tail_matches else None
    flagged = conf_match is None
    if conf_match is not None:
        confidence = min(1.0, max(0.0, float(conf_match.group(1))))

    findings = _rule_findings(text, default=answered_yes)
    stop = answered_yes and all(findings)
    if answered_yes and not stop:
        flagged = True  # answer said Yes but a rule finding was negative
    return StopVerdict(stop, confidence, findings, text, flagged=flagged)


def _rule_findings(text: str, default: bool) -> tuple[bool, bool, bool]:
    """Best-effort verdict per numbered stop rule; unparseable rules inherit
    the final answer so they can never spuriously block a clean verdict."""
    findings: list[bool] = []
    lines = text.splitlines()
    for rule in (1, 2, 3):
        head = re.compile(rf"^\s*(?:rule\s*)?{rule}\s*[.):\-]", re.IGNORECASE)
        segment = ""
        for i, line in enumerate(lines):
            if head.match(line):
                nxt = re.compile(rf"^\s*(?:rule\s*)?{rule + 1}\s*[.):\-]", re.IGNORECASE)
                chunk = [line]
                for follow in lines[i + 1 :]:
                    if nxt.match(follow) or _ANSWER_RE.search(follow):
                        break
                    chunk.append(follow)
                segment = " ".join(chunk)
        if not segment:
            findings.append(default)
            continue
        negative = bool(_NEGATIVE_RE.search(segment))
        positive = bool(_POSITIVE_RE.search(segment))
        if negative:
            findings.append(False)
        elif positive:
            findings.append(True)
        else:
            findings.append(default)
    return tuple(findings)  # type: ignore[return-value]


_REC_LINE_RE = re.compile(r"^\s*(?:\d+\s*[.)]\s*)?trial\s*#?\s*(\d+)\s*[:\-]\s*(.+?)\s*$", re.IGNORECASE)
_BARE_NUMBER_RE = re.compile(r"^\s*\d+\s*[.)]\s*(?:trial\s*)?#?\s*(\d+)\s*$", re.IGNORECASE)


def parse_recommendations(
    text: str,
    space: SearchSpace,
    n_expected: int,
    explored: set[int] | None = None,
) -> list[Recommendation]:
    """Extract exactly n_expected validated, novel recommendations.

    Preferred contract: a terminal block opened by a `RECOMMENDATIONS:` line
    with one `trial <number>: <dim>=<value>, ...` line per pick. Fallbacks:
    such lines anywhere in the text, else a bare numbered list of config
    numbers. Params win over a mismatched leading number (the number is
    recomputed from the enumeration); bare numbers resolve via the
    enumeration. Explored and duplicate configs are dropped; a shortfall
    after filtering raises WrongCount so the caller can re-prompt.
    """
    explored = explored or set()
    candidates = _candidate_lines(text)
    if not candidates:
        raise WrongCount("no recommendation lines found in the reply")

    picks: list[Recommendation] = []
    seen: set[int] = set()
    for number, params_text, reasoning in candidates:
        if params_text is not None:
            config = _parse_params(params_text, space)
            number = space.index_of(config)
        else:
            if not 0 <= number < space.cardinality:
                raise InvalidValue(f"config number {number} outside [0, {space.cardinality})")
            config = space.config_at(number)
        if number in seen or number in explored:
            continue
        seen.add(number)
        picks.append(Recommendation(number=number, config=config, reasoning=reasoning))

    if len(picks) < n_expected:
        raise WrongCount(
            f"needed {n_expected} novel recommendations, got {len(picks)} after filtering"
        )
    return picks[:n_expected]


def _candidate_lines(text: str) -> list[tuple[int, str | None, str]]:
    """(number, params_text or None, reasoning) candidates, best source first."""
    block_start = None
    lines = text.splitlines()
    for i, line in enumerate(lines):
        if re.match(r"^\s*\**\s*RECOMMENDATIONS\s*\**\s*:\s*$", line, re.IGNORECASE):
            block_start = i + 1  # last block wins
    sources = []
    if block_start is not None:
        sources.append(lines[block_start:])
    sources.append(lines)  # fallback: trial lines anywhere
    for source in sources:
        found = []
        for line in source:
            m = _REC_LINE_RE.match(line)
            if m:
                found.append((int(m.group(1)), m.group(2), line.strip()))
        if found:
            return found
    bare = [( int(m.group(1)), None, line.strip())
            for line in lines if (m := _BARE_NUMBER_RE.match(line))]
    return bare


def _parse_params(params_text: str, space: SearchSpace) -> TrialConfig:
    """Parse `dim=value, dim=value, ...` and validate against the space."""
    assignments: dict[str, str] = {}
    body = params_text.strip().strip("{}")
    for part in body.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" in part:
            key, _, raw = part.partition("=")
        elif ":" in part:
            key, _, raw = part.partition(":")
        else:
            raise InvalidValue(f"cannot parse param assignment {part!r}")
        assignments[key.strip().strip("`'\"")] = raw.strip().strip("`'\"")

    missing = set(space.names) - set(assignments)
    if missing:
        raise MissingDimension(f"params leave out dimensions {sorted(missing)}")
    unknown = set(assignments) - set(space.names)
    if unknown:
        raise MissingDimension(f"params name unknown dimensions {sorted(unknown)}")

    config: TrialConfig = {}
    for name in space.names:
        raw = assignments[name]
        matched = None
        for candidate in space.values_of(name):
            if str(candidate) == raw:
                matched = candidate
                break
        if matched is None:
            raise InvalidValue(
                f"value {raw!r} for {name!r} is not in the search space "
                f"(candidates: {list(space.values_of(name))})"
            )
        config[name] = matched
    return config
