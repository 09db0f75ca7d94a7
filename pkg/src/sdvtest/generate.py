"""Turn a statechart plus structured requirements into Gherkin scenarios.

Requirements name the transitions that realize them. Requirements sharing an
ID prefix (``Req_CPDS_04.1``, ``Req_CPDS_04.2``) form one scenario whose path
is the shortest walk from the initial state covering all of their
transitions. A group whose transitions already lie on another group's path is
folded into that scenario.
"""

from __future__ import annotations

import re
from collections import deque
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path

from sdvtest.cpds import HAS_DRIVER_ACKNOWLEDGED
from sdvtest.errors import ParseError, SdvTestError
from sdvtest.gherkin import Feature, Scenario, Step
from sdvtest.literals import format_literal, parse_literal, same_literal
from sdvtest.runner import AliasTable, format_duration, render_script
from sdvtest.statechart import SignalEvent, StateChart, Timeout

MAX_BOUND_TRANSITIONS = 16


class GenerationError(SdvTestError):
    pass


class UnboundRequirement(GenerationError):
    def __init__(self, req_id: str, reason: str):
        self.req_id = req_id
        super().__init__(f"{req_id}: {reason}")


class NoPath(GenerationError):
    def __init__(self, group: str):
        self.group = group
        super().__init__(f"transitions of {group} cannot be covered by one walk from the initial state")


class UnmappedSignal(GenerationError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"raw signal {name} has no catalog mapping")


@dataclass(frozen=True)
class Requirement:
    id: str
    text: str
    binds: tuple[tuple[str, str], ...]

    @property
    def group(self) -> str:
        return self.id.rsplit(".", 1)[0] if "." in self.id else self.id


@dataclass
class RequirementSet:
    requirements: list[Requirement] = field(default_factory=list)
    titles: dict[str, str] = field(default_factory=dict)

    def __iter__(self):
        return iter(self.requirements)

    def __len__(self) -> int:
        return len(self.requirements)


_REQ = re.compile(r'req\s+(\S+)\s+("(?:[^"\\]|\\.)*")\s+binds\s+(.+)\Z')
_GROUP = re.compile(r'group\s+(\S+)\s+("(?:[^"\\]|\\.)*")\Z')
_BIND = re.compile(r"\s*([A-Za-z][\w.]*)\s*->\s*([A-Za-z][\w.]*)\s*\Z")


def parse_requirements(text: str) -> RequirementSet:
    """Parse ``req <ID> "<text>" binds <Src>-><Dst>[, ...]`` lines.

    ``group <prefix> "<title>"`` lines name the scenario generated for a group.
    """
    reqs = RequirementSet()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _GROUP.match(line)
        if m:
            reqs.titles[m.group(1)] = parse_literal(m.group(2))
            continue
        m = _REQ.match(line)
        if not m:
            raise ParseError(f"expected 'req <ID> \"<text>\" binds <Src>-><Dst>', got {line!r}", lineno)
        req_id, quoted, bind_text = m.groups()
        binds = []
        for part in bind_text.split(","):
            b = _BIND.match(part)
            if not b:
                raise ParseError(f"bad transition locator {part.strip()!r}", lineno)
            binds.append(b.groups())
        if any(r.id == req_id for r in reqs.requirements):
            raise ParseError(f"requirement {req_id} declared twice", lineno)
        reqs.requirements.append(Requirement(req_id, parse_literal(quoted), tuple(binds)))
    return reqs


def load_requirements(path: str | Path) -> RequirementSet:
    return parse_requirements(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    path: tuple[int, ...]
    requirement_ids: tuple[str, ...]
    tags: tuple[tuple[int, tuple[str, ...]], ...] = ()

    def tags_of(self, index: int) -> tuple[str, ...]:
        return dict(self.tags).get(index, ())


@dataclass(frozen=True)
class GenPlan:
    feature_name: str
    scenario_specs: tuple[ScenarioSpec, ...]


def _bound_indices(chart: StateChart, req: Requirement) -> list[int]:
    if not req.binds:
        raise UnboundRequirement(req.id, "binds no transitions")
    found = []
    for src, dst in req.binds:
        hits = [i for i, t in enumerate(chart.transitions) if t.source == src and t.target == dst]
        if not hits:
            raise UnboundRequirement(req.id, f"no transition {src}->{dst} in chart {chart.name}")
        found += hits
    return sorted(set(found))


def covering_walk(chart: StateChart, required: Iterable[int]) -> list[int] | None:
    """Shortest transition sequence from ``initial`` that takes every required transition."""
    required = sorted(set(required))
    if len(required) > MAX_BOUND_TRANSITIONS:
        raise GenerationError(f"at most {MAX_BOUND_TRANSITIONS} bound transitions per group")
    bit = {idx: 1 << k for k, idx in enumerate(required)}
    full = (1 << len(required)) - 1
    start = (chart.enter(chart.initial), 0)
    parent: dict[tuple[str, int], tuple[tuple[str, int], int] | None] = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node[1] == full:
            walk = []
            while parent[node] is not None:
                node, idx = parent[node]
                walk.append(idx)
            return walk[::-1]
        for idx, t in chart.enabled(node[0]):
            nxt = (chart.enter(t.target), node[1] | bit.get(idx, 0))
            if nxt not in parent:
                parent[nxt] = (node, idx)
                queue.append(nxt)
    return None


def plan_scenarios(
    chart: StateChart,
    reqs: RequirementSet | Iterable[Requirement],
    titles: Mapping[str, str] | None = None,
    feature_name: str | None = None,
) -> GenPlan:
    if isinstance(reqs, RequirementSet):
        titles = {**reqs.titles, **(titles or {})}
        reqs = reqs.requirements
    reqs = list(reqs)
    titles = titles or {}
    bound = {r.id: _bound_indices(chart, r) for r in reqs}

    groups: dict[str, list[Requirement]] = {}
    for r in reqs:
        groups.setdefault(r.group, []).append(r)
    walks = {}
    for gid, members in groups.items():
        walk = covering_walk(chart, [i for r in members for i in bound[r.id]])
        if walk is None:
            raise NoPath(gid)
        walks[gid] = walk

    kept: dict[str, list[str]] = {}
    for gid in sorted(groups, key=lambda g: (-len(walks[g]), g)):
        mine = {i for r in groups[gid] for i in bound[r.id]}
        host = next((k for k in kept if mine <= set(walks[k])), None)
        if host is None:
            kept[gid] = [gid]
        else:
            kept[host].append(gid)

    specs = []
    for gid in sorted(kept):
        ids = sorted(r.id for g in kept[gid] for r in groups[g])
        walk = walks[gid]
        tags = []
        for idx in sorted(set(walk)):
            on = tuple(rid for rid in ids if idx in bound[rid])
            if on:
                tags.append((idx, on))
        name = f"{titles[gid]} ({gid})" if gid in titles else f"{gid} scenario"
        specs.append(ScenarioSpec(name, tuple(walk), tuple(ids), tuple(tags)))
    return GenPlan(feature_name or chart.name, tuple(specs))


def _timeout_of(chart: StateChart, leaf: str) -> int | None:
    for scope in chart.context_of(leaf):
        for t in chart.transitions:
            if t.source == scope and isinstance(t.trigger, Timeout):
                return t.trigger.seconds
    return None


def _awaits_ack(chart: StateChart, leaf: str, mappings: Mapping[str, str], ack_path: str) -> bool:
    return any(
        isinstance(t.trigger, SignalEvent) and mappings.get(t.trigger.name) == ack_path
        for _, t in chart.enabled(leaf)
    )


def emit_feature(
    plan: GenPlan,
    chart: StateChart,
    mappings: Mapping[str, str],
    aliases: AliasTable | None = None,
    ack_path: str = HAS_DRIVER_ACKNOWLEDGED,
) -> Feature:
    """Render each scenario spec as Gherkin steps over mapped VSS paths.

    Signal conditions and elapsed windows before the first stimulus become
    Given steps; transition actions and later events become When steps; the
    final transition's actions become Then assertions. With an alias table,
    canonical steps are written in their preferred natural phrasing.
    """
    scenarios = []
    for spec in plan.scenario_specs:
        for idx in spec.path:
            t = chart.transitions[idx]
            names = [t.trigger.name] if isinstance(t.trigger, SignalEvent) else []
            for name in names + [a.signal_name for a in t.actions]:
                if name not in mappings:
                    raise UnmappedSignal(name)

        drafts: list[tuple[str, str, tuple[str, ...]]] = []
        acted = False
        leaf = chart.enter(chart.initial)
        for pos, idx in enumerate(spec.path):
            t = chart.transitions[idx]
            before, leaf = leaf, chart.enter(t.target)
            tags = spec.tags_of(idx)
            if not tags:
                continue
            trig = t.trigger
            if isinstance(trig, SignalEvent):
                path = mappings[trig.name]
                window = _timeout_of(chart, before)
                if path == ack_path and trig.literal is True and window:
                    text = f"acknowledges within {format_duration(window)} of {chart.label_of(before)}"
                    drafts.append(("when", text, tags))
                    acted = True
                else:
                    drafts.append(("when" if acted else "given", f"{path} is {format_literal(trig.literal)}", tags))
            else:
                if _awaits_ack(chart, before, mappings, ack_path):
                    text = f"no acknowledgment within {format_duration(trig.seconds)} of {chart.label_of(before)}"
                else:
                    text = f"after {format_duration(trig.seconds)}"
                drafts.append(("when" if acted else "given", text, tags))
            last = pos == len(spec.path) - 1
            for action in t.actions:
                path = mappings[action.signal_name]
                lit = format_literal(action.literal)
                if last:
                    default = chart.default_of(action.signal_name)
                    if default is not None and same_literal(default, action.literal):
                        drafts.append(("then", f"{path} is reset to {lit}", tags))
                    else:
                        drafts.append(("then", f"{path} is {lit}", tags))
                else:
                    drafts.append(("when", f"{path} is set to {lit}", tags))
                    acted = True

        steps = []
        previous = None
        for kind, text, tags in drafts:
            keyword = "And" if kind == previous else kind.capitalize()
            previous = kind
            if aliases is not None:
                text = aliases.phrase(text)
            steps.append(Step(keyword, kind, text, tags))
        scenarios.append(Scenario(spec.name, tuple(steps)))
    return Feature(plan.feature_name, tuple(scenarios))


def emit_runner_script(
    feature: Feature,
    mappings: Mapping[str, str] | None = None,
    aliases: AliasTable | None = None,
) -> str:
    """Declarative runner script for ``feature``; raises ``UnboundStep`` on unknown phrasing."""
    return render_script(feature, aliases, mappings)
