"""Minimal, dependency-free Gherkin: Feature, Scenario, Given/When/Then/And.

Requirement references ride as trailing bracketed suffixes on a step::

    And no driver acknowledgment occurs within 5 minutes of escalation [Req_CPDS_04.1]
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from sdvtest.errors import ParseError

STEP_KEYWORDS = ("Given", "When", "Then", "And")
_REJECTED = ("But", "Background:", "Scenario Outline:", "Scenario Template:", "Examples:", "Rule:", "|", '"""', "```", "@")
_TRAILING_TAG = re.compile(r"\s*\[(Req_[A-Za-z0-9_.]+)\]\s*\Z")


class LeadingAnd(ParseError):
    pass


class UnknownKeyword(ParseError):
    pass


class EmptyDocument(ParseError):
    pass


@dataclass(frozen=True)
class Step:
    keyword_literal: str
    kind: str
    text: str
    req_tags: tuple[str, ...] = ()


@dataclass(frozen=True)
class Scenario:
    name: str
    steps: tuple[Step, ...] = ()


@dataclass(frozen=True)
class Feature:
    name: str
    scenarios: tuple[Scenario, ...] = ()

    def __post_init__(self):
        if not self.name:
            raise ValueError("feature name must be non-empty")


def split_tags(text: str) -> tuple[str, tuple[str, ...]]:
    """Peel trailing ``[Req_...]`` annotations off a step body."""
    tags: list[str] = []
    text = text.strip()
    while True:
        m = _TRAILING_TAG.search(text)
        if m is None:
            break
        tags.append(m.group(1))
        text = text[: m.start()].rstrip()
    return text, tuple(reversed(tags))


def _step_line(line: str) -> tuple[str, str] | None:
    for kw in STEP_KEYWORDS:
        if line.startswith(kw) and (len(line) == len(kw) or line[len(kw)].isspace()):
            return kw, line[len(kw):].strip()
    return None


def parse_feature(text: str) -> Feature:
    feature_name: str | None = None
    scenarios: list[Scenario] = []
    current: tuple[str, list[Step]] | None = None

    def close() -> None:
        if current is not None:
            scenarios.append(Scenario(current[0], tuple(current[1])))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith(_REJECTED):
            raise UnknownKeyword(f"unsupported Gherkin construct: {line!r}", lineno)
        if line.startswith("Feature:"):
            if feature_name is not None or current is not None:
                raise UnknownKeyword("'Feature:' must come first and only once", lineno)
            feature_name = line[len("Feature:"):].strip() or "Unnamed"
            continue
        if line.startswith("Scenario:"):
            close()
            current = (line[len("Scenario:"):].strip(), [])
            continue
        if current is None:
            # free-form feature description
            if feature_name is not None:
                continue
            raise UnknownKeyword(f"expected 'Feature:' or 'Scenario:', found {line!r}", lineno)
        step = _step_line(line)
        if step is None:
            raise UnknownKeyword(f"unknown step keyword in {line!r}", lineno)
        keyword, body = step
        body, tags = split_tags(body)
        if not body:
            raise UnknownKeyword(f"{keyword} step without text", lineno)
        steps = current[1]
        if keyword == "And":
            if not steps:
                raise LeadingAnd("scenario may not start with 'And'", lineno)
            kind = steps[-1].kind
        else:
            kind = keyword.lower()
        steps.append(Step(keyword, kind, body, tags))
    close()
    if feature_name is None and not scenarios:
        raise EmptyDocument("document contains no Feature or Scenario")
    return Feature(feature_name or "Unnamed", tuple(scenarios))


def render_step(step: Step) -> str:
    suffix = "".join(f" [{t}]" for t in step.req_tags)
    return f"{step.keyword_literal} {step.text}{suffix}"


def render_feature(feature: Feature) -> str:
    blocks = [f"Feature: {feature.name}"]
    for scenario in feature.scenarios:
        lines = [f"Scenario: {scenario.name}".rstrip()]
        lines += ["  " + render_step(s) for s in scenario.steps]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def requirement_trace(feature: Feature) -> dict[str, list[tuple[str, int]]]:
    """Requirement ID -> (scenario name, 0-based step index) occurrences."""
    trace: dict[str, list[tuple[str, int]]] = {}
    for scenario in feature.scenarios:
        for i, step in enumerate(scenario.steps):
            for tag in step.req_tags:
                trace.setdefault(tag, []).append((scenario.name, i))
    return {k: trace[k] for k in sorted(trace)}
