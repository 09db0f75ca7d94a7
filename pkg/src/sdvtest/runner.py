"""Bind Gherkin steps to broker operations and execute them in virtual time.

Canonical step grammar (``<literal>`` is a single token or a quoted string,
``<duration>`` is ``N seconds`` or ``N minutes``)::

    <path> is set to <literal>                     set the signal
    <path> is reset to <literal>                   assert the signal
    <path> is <literal>                            set (given/when) or assert (then)
    after <duration>                               advance the clock
    no acknowledgment within <duration> of <ctx>   advance the clock
    acknowledges within <duration> of <ctx>        wait ack_delay, then acknowledge

Any other phrasing must be listed in an alias table that rewrites it to one
of the forms above.
"""

from __future__ import annotations

import json
import re
import time
from collections.abc import Callable, Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from sdvtest.broker import Broker, BrokerError, TypeMismatch, UnknownPath
from sdvtest.cpds import HAS_DRIVER_ACKNOWLEDGED, Cpds
from sdvtest.errors import ParseError, SdvTestError
from sdvtest.gherkin import STEP_KEYWORDS, Feature, Scenario, Step, requirement_trace, split_tags
from sdvtest.literals import LITERAL_PATTERN, Literal, coerce, format_literal, parse_literal, same_literal
from sdvtest.vss import Catalog

DEFAULT_ACK_DELAY = 60

_PATH = r"[A-Za-z][A-Za-z0-9_]*(?:\.[A-Za-z][A-Za-z0-9_]*)*"
_DURATION = r"\d+ (?:seconds?|minutes?)"
_SLOT_PATTERNS = {"path": _PATH, "literal": LITERAL_PATTERN, "duration": _DURATION}

GRAMMAR: tuple[tuple[str, re.Pattern], ...] = tuple(
    (form, re.compile(pattern + r"\Z"))
    for form, pattern in (
        ("set_to", rf"(?P<path>{_PATH}) is set to (?P<literal>{LITERAL_PATTERN})"),
        ("reset_to", rf"(?P<path>{_PATH}) is reset to (?P<literal>{LITERAL_PATTERN})"),
        ("is", rf"(?P<path>{_PATH}) is (?P<literal>{LITERAL_PATTERN})"),
        ("after", rf"after (?P<duration>{_DURATION})"),
        ("no_ack", rf"no acknowledgment within (?P<duration>{_DURATION}) of (?P<context>.+)"),
        ("ack", rf"acknowledges within (?P<duration>{_DURATION}) of (?P<context>.+)"),
    )
)


class RunnerError(SdvTestError):
    pass


class UnboundStep(RunnerError):
    def __init__(self, text: str):
        self.text = text
        super().__init__(f"no step binding for {text!r}")


def parse_duration(text: str) -> int:
    number, unit = text.split()
    return int(number) * (60 if unit.startswith("minute") else 1)


def format_duration(seconds: int) -> str:
    if seconds % 60 == 0:
        n, unit = seconds // 60, "minute"
    else:
        n, unit = seconds, "second"
    return f"{n} {unit}" if n == 1 else f"{n} {unit}s"


def match_grammar(text: str) -> tuple[str, dict[str, str]] | None:
    for form, pattern in GRAMMAR:
        m = pattern.match(text)
        if m:
            return form, m.groupdict()
    return None


# --------------------------------------------------------------------------
# alias table

_PLACEHOLDER = re.compile(r"\{(\w+)\}")


def _template_regex(template: str) -> re.Pattern:
    parts, pos = [], 0
    for m in _PLACEHOLDER.finditer(template):
        parts.append(re.escape(template[pos : m.start()]))
        name = m.group(1)
        parts.append(f"(?P<{name}>{_SLOT_PATTERNS.get(name, '.+?')})")
        pos = m.end()
    parts.append(re.escape(template[pos:]))
    return re.compile("".join(parts) + r"\Z")


@dataclass(frozen=True)
class Alias:
    phrase: str
    canonical: str

    def rewrite(self, text: str) -> str | None:
        m = _template_regex(self.phrase).match(text)
        return self.canonical.format(**m.groupdict()) if m else None

    def phrase_for(self, canonical: str) -> str | None:
        m = _template_regex(self.canonical).match(canonical)
        return self.phrase.format(**m.groupdict()) if m else None


class AliasTable:
    """Ordered phrase -> canonical rewrites; first match wins in both directions."""

    def __init__(self, aliases: Iterable[Alias] = ()):
        self.aliases = tuple(aliases)

    @classmethod
    def parse(cls, text: str) -> AliasTable:
        aliases = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            phrase, sep, canonical = line.partition("=>")
            if not sep or not phrase.strip() or not canonical.strip():
                raise ParseError(f"expected '<phrase> => <canonical>', got {line!r}", lineno)
            aliases.append(Alias(phrase.strip(), canonical.strip()))
        return cls(aliases)

    @classmethod
    def shipped(cls) -> AliasTable:
        return cls.parse(resources.files("sdvtest.data").joinpath("aliases.txt").read_text(encoding="utf-8"))

    @classmethod
    def load(cls, path: str | Path) -> AliasTable:
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def canonical(self, text: str) -> str | None:
        for alias in self.aliases:
            rewritten = alias.rewrite(text)
            if rewritten is not None and match_grammar(rewritten):
                return rewritten
        return None

    def phrase(self, canonical: str) -> str:
        """Preferred natural phrasing for a canonical step, or the step itself."""
        for alias in self.aliases:
            phrase = alias.phrase_for(canonical)
            if phrase is not None and self.canonical(phrase) == canonical:
                return phrase
        return canonical

    def __len__(self) -> int:
        return len(self.aliases)


def canonicalize(text: str, aliases: AliasTable | None = None) -> str:
    if match_grammar(text):
        return text
    if aliases is not None:
        rewritten = aliases.canonical(text)
        if rewritten is not None:
            return rewritten
    raise UnboundStep(text)


# --------------------------------------------------------------------------
# binding


@dataclass(frozen=True)
class BoundAction:
    kind: str  # set_signal | assert_signal | advance_time | delayed_set
    path: str | None = None
    literal: Literal | None = None
    duration: int | None = None

    def __post_init__(self):
        needs = {
            "set_signal": ("path", "literal"),
            "assert_signal": ("path", "literal"),
            "advance_time": ("duration",),
            "delayed_set": ("path", "literal", "duration"),
        }[self.kind]
        if any(getattr(self, f) is None for f in needs):
            raise ValueError(f"{self.kind} requires {', '.join(needs)}")


def bind_canonical(
    text: str,
    kind: str,
    catalog: Catalog,
    *,
    ack_delay: int = DEFAULT_ACK_DELAY,
    mappings: Mapping[str, str] | None = None,
    ack_path: str = HAS_DRIVER_ACKNOWLEDGED,
) -> BoundAction:
    matched = match_grammar(text)
    if matched is None:
        raise UnboundStep(text)
    form, groups = matched
    if form in ("after", "no_ack"):
        return BoundAction("advance_time", duration=parse_duration(groups["duration"]))

    if form == "ack":
        window = parse_duration(groups["duration"])
        if not 0 < ack_delay < window:
            raise RunnerError(f"acknowledgment delay {ack_delay}s is not within {format_duration(window)}")
        path, literal = ack_path, True
        action = "delayed_set"
    else:
        path = groups["path"]
        if mappings and path in mappings:
            path = mappings[path]
        try:
            literal = parse_literal(groups["literal"])
        except ValueError as exc:
            raise RunnerError(str(exc)) from None
        if form == "set_to" or (form == "is" and kind != "then"):
            action = "set_signal"
        else:
            action = "assert_signal"

    node = catalog.nodes.get(path)
    if node is None or not node.is_leaf:
        raise UnknownPath(path)
    try:
        literal = coerce(literal, node.datatype)
    except TypeError as exc:
        raise TypeMismatch(path, str(exc)) from None
    if action == "delayed_set":
        return BoundAction(action, path, literal, ack_delay)
    return BoundAction(action, path, literal)


def bind_step(
    step: Step,
    catalog: Catalog,
    aliases: AliasTable | None = None,
    *,
    ack_delay: int = DEFAULT_ACK_DELAY,
    mappings: Mapping[str, str] | None = None,
    ack_path: str = HAS_DRIVER_ACKNOWLEDGED,
) -> BoundAction:
    """Resolve a step to the broker operation it stands for."""
    if aliases is None:
        aliases = AliasTable.shipped()
    text = canonicalize(step.text, aliases)
    return bind_canonical(text, step.kind, catalog, ack_delay=ack_delay, mappings=mappings, ack_path=ack_path)


# --------------------------------------------------------------------------
# execution


@dataclass(frozen=True)
class StepResult:
    step: Step
    outcome: str  # passed | failed | error
    detail: str
    at: int


@dataclass(frozen=True)
class ScenarioResult:
    scenario: Scenario
    results: tuple[StepResult, ...]
    verdict: str  # passed | failed | error
    virtual_seconds: int
    event_log: tuple[str, ...] = ()


@dataclass(frozen=True)
class TestReport:
    __test__ = False  # not a pytest class

    feature: str
    scenarios: tuple[ScenarioResult, ...]
    requirements: dict[str, str]
    started_at_virtual: int = 0
    total_virtual_seconds: int = 0
    wall_seconds: float = field(default=0.0, compare=False)

    @property
    def verdicts(self) -> list[str]:
        return [s.verdict for s in self.scenarios]

    def exit_code(self) -> int:
        """0 all passed, 1 any assertion failed, 3 any step could not be bound or run."""
        if any(v == "error" for v in self.verdicts):
            return 3
        if any(v == "failed" for v in self.verdicts):
            return 1
        return 0

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "verdict": {0: "passed", 1: "failed"}.get(self.exit_code(), "error"),
            "started_at_virtual": self.started_at_virtual,
            "total_virtual_seconds": self.total_virtual_seconds,
            "scenarios": [
                {
                    "name": s.scenario.name,
                    "verdict": s.verdict,
                    "virtual_seconds": s.virtual_seconds,
                    "steps": [
                        {
                            "keyword": r.step.keyword_literal,
                            "kind": r.step.kind,
                            "text": r.step.text,
                            "req_tags": list(r.step.req_tags),
                            "outcome": r.outcome,
                            "detail": r.detail,
                            "at": r.at,
                        }
                        for r in s.results
                    ],
                    "event_log": list(s.event_log),
                }
                for s in self.scenarios
            ],
            "requirements": dict(self.requirements),
            "meta": {"wall_seconds": round(self.wall_seconds, 6)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def render_human(self) -> str:
        tag = {"passed": "PASS", "failed": "FAIL", "error": "ERROR"}
        lines = [f"Feature: {self.feature}"]
        for s in self.scenarios:
            lines.append(f"{tag[s.verdict]} Scenario: {s.scenario.name}")
            for r in s.results:
                line = f"  {tag[r.outcome]} t={r.at} {r.step.keyword_literal} {r.step.text}"
                if r.outcome != "passed":
                    line += f"  -- {r.detail}"
                lines.append(line)
        for req, verdict in self.requirements.items():
            lines.append(f"{verdict.upper()} {req}")
        passed = sum(v == "passed" for v in self.verdicts)
        lines.append(
            f"{passed}/{len(self.scenarios)} scenarios passed, {self.total_virtual_seconds}s virtual time"
        )
        return "\n".join(lines) + "\n"


def _execute(broker: Broker, action: BoundAction) -> tuple[str, str]:
    if action.kind == "set_signal":
        broker.set(action.path, action.literal)
        return "passed", f"set {action.path} = {format_literal(action.literal)}"
    if action.kind == "advance_time":
        broker.advance(action.duration)
        return "passed", f"advanced {action.duration}s"
    if action.kind == "delayed_set":
        broker.advance(action.duration)
        broker.set(action.path, action.literal)
        return "passed", f"after {action.duration}s set {action.path} = {format_literal(action.literal)}"
    actual = broker.get(action.path)
    expected = f"expected={format_literal(action.literal)} actual={format_literal(actual)}"
    if same_literal(actual, action.literal):
        return "passed", f"{action.path} {expected}"
    return "failed", f"{action.path} {expected}"


def run_scenario(
    scenario: Scenario,
    broker: Broker,
    *,
    aliases: AliasTable | None = None,
    ack_delay: int = DEFAULT_ACK_DELAY,
    mappings: Mapping[str, str] | None = None,
    canonical_texts: list[str] | None = None,
) -> tuple[list[StepResult], str]:
    """Run steps in order on a fresh broker; failed asserts continue, errors stop."""
    if aliases is None:
        aliases = AliasTable.shipped()
    results: list[StepResult] = []
    for i, step in enumerate(scenario.steps):
        try:
            text = canonical_texts[i] if canonical_texts is not None else canonicalize(step.text, aliases)
            action = bind_canonical(text, step.kind, broker.catalog, ack_delay=ack_delay, mappings=mappings)
            outcome, detail = _execute(broker, action)
        except (RunnerError, BrokerError) as exc:
            results.append(StepResult(step, "error", str(exc), broker.now))
            return results, "error"
        results.append(StepResult(step, outcome, detail, broker.now))
    verdict = "passed" if all(r.outcome == "passed" for r in results) else "failed"
    return results, verdict


SutFactory = Callable[[], object] | None


def _run_one(scenario, catalog, sut_factory, canonical, kwargs) -> ScenarioResult:
    broker = Broker(catalog)
    if sut_factory is not None:
        sut_factory().attach(broker)
    results, verdict = run_scenario(scenario, broker, canonical_texts=canonical, **kwargs)
    return ScenarioResult(scenario, tuple(results), verdict, broker.now, broker.event_log)


def requirement_verdicts(feature: Feature, scenario_results: Iterable[ScenarioResult]) -> dict[str, str]:
    outcomes: dict[tuple[str, int], str] = {}
    for si, s in enumerate(scenario_results):
        for i, r in enumerate(s.results):
            outcomes[(si, i)] = r.outcome
    index = {}
    for si, s in enumerate(feature.scenarios):
        for i, step in enumerate(s.steps):
            for tag in step.req_tags:
                index.setdefault(tag, []).append((si, i))
    verdicts = {}
    for req in requirement_trace(feature):
        seen = [outcomes.get(loc) for loc in index[req]]
        if any(o in ("failed", "error") for o in seen):
            verdicts[req] = "failed"
        elif all(o == "passed" for o in seen):
            verdicts[req] = "passed"
        else:
            verdicts[req] = "untested"
    return verdicts


def run_feature(
    feature: Feature,
    catalog: Catalog,
    sut_factory: SutFactory = Cpds,
    *,
    aliases: AliasTable | None = None,
    ack_delay: int = DEFAULT_ACK_DELAY,
    mappings: Mapping[str, str] | None = None,
    jobs: int = 1,
    canonical: list[list[str]] | None = None,
) -> TestReport:
    """Run each scenario on its own broker and SUT, in document order."""
    started = time.perf_counter()
    kwargs = {"aliases": aliases if aliases is not None else AliasTable.shipped(),
              "ack_delay": ack_delay, "mappings": mappings}
    texts = canonical or [None] * len(feature.scenarios)
    work = list(zip(feature.scenarios, texts))
    if jobs > 1 and len(work) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda w: _run_one(w[0], catalog, sut_factory, w[1], kwargs), work))
    else:
        results = [_run_one(s, catalog, sut_factory, t, kwargs) for s, t in work]
    return TestReport(
        feature=feature.name,
        scenarios=tuple(results),
        requirements=requirement_verdicts(feature, results),
        started_at_virtual=0,
        total_virtual_seconds=sum(r.virtual_seconds for r in results),
        wall_seconds=time.perf_counter() - started,
    )


# --------------------------------------------------------------------------
# declarative runner scripts

SCRIPT_HEADER = "# sdvtest runner script v1"


def render_script(feature: Feature, aliases: AliasTable | None = None,
                  mappings: Mapping[str, str] | None = None) -> str:
    """Canonical, line-oriented script equivalent to running ``feature`` in-process."""
    if aliases is None:
        aliases = AliasTable.shipped()
    lines = [SCRIPT_HEADER, f"feature {json.dumps(feature.name)}"]
    for scenario in feature.scenarios:
        lines += ["", f"scenario {json.dumps(scenario.name)}"]
        previous_kind = None
        for step in scenario.steps:
            text = canonicalize(step.text, aliases)
            if previous_kind is not None and step.kind != previous_kind:
                lines.append("")
            previous_kind = step.kind
            tags = "".join(f" [{t}]" for t in step.req_tags)
            lines.append(f"  {step.kind} {text}{tags}")
            if step.keyword_literal != step.kind.capitalize() or step.text != text:
                lines.append(f"    as {step.keyword_literal} {json.dumps(step.text)}")
            form, groups = match_grammar(text)
            if form == "reset_to" or (form == "is" and step.kind == "then"):
                path = groups["path"]
                if mappings and path in mappings:
                    path = mappings[path]
                lines.append(f"    # expect {path} == {groups['literal']}")
    return "\n".join(lines) + "\n"


_SCRIPT_STEP = re.compile(r"(given|when|then) (.+)\Z")
_SCRIPT_AS = re.compile(r"as (\w+) (\".*\")\Z")


def parse_script(text: str) -> tuple[Feature, list[list[str]]]:
    """Read a runner script back into a Feature plus each step's canonical text."""
    name = None
    scenarios: list[tuple[str, list[Step], list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            if line.startswith("feature "):
                name = json.loads(line[len("feature "):])
                continue
            if line.startswith("scenario "):
                scenarios.append((json.loads(line[len("scenario "):]), [], []))
                continue
        except json.JSONDecodeError:
            raise ParseError(f"bad quoted name in {line!r}", lineno) from None
        if not scenarios:
            raise ParseError("step outside a scenario", lineno)
        steps, texts = scenarios[-1][1], scenarios[-1][2]
        m = _SCRIPT_STEP.match(line)
        if m:
            kind, rest = m.groups()
            body, tags = split_tags(rest)
            steps.append(Step(kind.capitalize(), kind, body, tags))
            texts.append(body)
            continue
        m = _SCRIPT_AS.match(line)
        if m and steps and m.group(1) in STEP_KEYWORDS:
            prev = steps[-1]
            steps[-1] = Step(m.group(1), prev.kind, json.loads(m.group(2)), prev.req_tags)
            continue
        raise ParseError(f"unrecognized script line {line!r}", lineno)
    if name is None:
        raise ParseError("script has no feature line", None)
    feature = Feature(name, tuple(Scenario(n, tuple(st)) for n, st, _ in scenarios))
    return feature, [t for _, _, t in scenarios]


def run_script(text: str, catalog: Catalog, sut_factory: SutFactory = Cpds, **kwargs) -> TestReport:
    feature, canonical = parse_script(text)
    return run_feature(feature, catalog, sut_factory, canonical=canonical, **kwargs)
