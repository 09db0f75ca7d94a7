"""Textual statechart DSL standing in for UML state-machine diagrams.

Newlines are not significant; statements are recognized by keyword::

    chart CPDS
    initial Standby
    default IsChildDetected = false
    state Standby
    state DriverNotified {
      entry IsDriverNotified = true
      after 300s -> Escalation
      on HasDriverAcknowledged == true -> Standby do IsChildDetected = false
    }
    transition Standby -> DriverNotified on IgnitionOff == true

Nested states are addressed as ``Parent.Child``. Inside a block, short-form
transitions take the enclosing state as source, and targets resolve against
the enclosing scopes from innermost outwards. Entering a composite state
enters its first child.
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

from sdvtest.errors import ParseError, SdvTestError
from sdvtest.literals import Literal, format_literal, parse_literal

KEYWORDS = frozenset(
    {"chart", "initial", "default", "state", "transition", "entry", "after", "on", "do", "true", "false"}
)


class ChartError(SdvTestError):
    pass


class ChartSyntaxError(ParseError, ChartError):
    def __init__(self, message: str, line: int | None, expected: str | None = None):
        self.expected = expected
        super().__init__(message, line)


class UnknownState(ChartError):
    def __init__(self, name: str, line: int | None = None):
        self.name = name
        self.line = line
        super().__init__(f"undeclared state {name!r}" + (f" (line {line})" if line else ""))


class DuplicateState(ChartError):
    def __init__(self, name: str, line: int | None = None):
        self.name = name
        self.line = line
        super().__init__(f"state {name!r} declared twice" + (f" (line {line})" if line else ""))


@dataclass(frozen=True)
class Action:
    signal_name: str
    literal: Literal

    def __post_init__(self):
        if not self.signal_name:
            raise ValueError("action signal name must be non-empty")


@dataclass(frozen=True)
class SignalEvent:
    name: str
    literal: Literal
    comparator: str = "=="


@dataclass(frozen=True)
class Timeout:
    seconds: int

    def __post_init__(self):
        if self.seconds <= 0:
            raise ValueError("timeout must be positive")


Trigger = SignalEvent | Timeout


@dataclass(frozen=True)
class State:
    name: str
    children: tuple[State, ...] = ()
    entry_actions: tuple[Action, ...] = ()
    label: str | None = None

    @property
    def is_composite(self) -> bool:
        return bool(self.children)


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    trigger: Trigger
    actions: tuple[Action, ...] = ()


@dataclass(frozen=True)
class StateChart:
    name: str
    states: tuple[State, ...]
    transitions: tuple[Transition, ...]
    initial: str
    defaults: tuple[tuple[str, Literal], ...] = ()

    def __post_init__(self):
        index = self.state_index()
        if self.initial not in index:
            raise UnknownState(self.initial)
        for t in self.transitions:
            for name in (t.source, t.target):
                if name not in index:
                    raise UnknownState(name)

    def state_index(self) -> dict[str, State]:
        """Full dotted name -> state, depth-first in declaration order."""
        return self._index

    @cached_property
    def _index(self) -> dict[str, State]:
        index: dict[str, State] = {}

        def visit(states, prefix):
            for s in states:
                full = prefix + s.name
                if full in index:
                    raise DuplicateState(full)
                index[full] = s
                visit(s.children, full + ".")

        visit(self.states, "")
        return index

    def default_of(self, signal: str) -> Literal | None:
        for name, value in self.defaults:
            if name == signal:
                return value
        return None

    def enter(self, name: str) -> str:
        """Innermost state actually active after entering ``name``."""
        index = self.state_index()
        state = index[name]
        while state.children:
            name = f"{name}.{state.children[0].name}"
            state = state.children[0]
        return name

    def context_of(self, name: str) -> list[str]:
        """``name`` followed by its ancestors, innermost first."""
        parts = name.split(".")
        return [".".join(parts[:i]) for i in range(len(parts), 0, -1)]

    def enabled(self, name: str) -> list[tuple[int, Transition]]:
        """Transitions that can fire while ``name`` is the active leaf."""
        scope = set(self.context_of(name))
        return [(i, t) for i, t in enumerate(self.transitions) if t.source in scope]

    def label_of(self, name: str) -> str:
        """Display label of a state, inherited from the nearest labelled ancestor."""
        index = self.state_index()
        for candidate in self.context_of(name):
            label = index[candidate].label
            if label:
                return label
        return name.rsplit(".", 1)[-1]


@dataclass(frozen=True)
class RawSignal:
    """A signal name as written in the chart plus where it occurs.

    Locators are ``("transition", index)`` or ``("state", full_name)``.
    """

    name: str
    occurrences: tuple[tuple[tuple[str, int | str], str], ...]

    @property
    def roles(self) -> set[str]:
        return {role for _, role in self.occurrences}


# --------------------------------------------------------------------------
# tokenizer

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<duration>\d+s\b)
  | (?P<number>[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*(?:\.[A-Za-z][A-Za-z0-9_]*)*)
  | (?P<op>->|==|=|,|\{|\})
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int


def _tokenize(text: str) -> list[_Tok]:
    tokens: list[_Tok] = []
    line = 1
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ChartSyntaxError(f"unexpected character {text[pos]!r}", line, "token")
        kind = m.lastgroup
        if kind == "nl":
            line += 1
        elif kind not in ("ws", "comment"):
            tokens.append(_Tok(kind, m.group(), line))
        pos = m.end()
    tokens.append(_Tok("eof", "", line))
    return tokens


# --------------------------------------------------------------------------
# parser


@dataclass
class _PendingTransition:
    source: str
    target: str
    scopes: list[str]
    trigger: Trigger
    actions: tuple[Action, ...]
    line: int


@dataclass
class _MutState:
    name: str
    label: str | None = None
    children: list[_MutState] = field(default_factory=list)
    entry: list[Action] = field(default_factory=list)

    def freeze(self) -> State:
        return State(self.name, tuple(c.freeze() for c in self.children), tuple(self.entry), self.label)


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0
        self.name: str | None = None
        self.initial: tuple[str, int] | None = None
        self.defaults: list[tuple[str, Literal]] = []
        self.roots: list[_MutState] = []
        self.pending: list[_PendingTransition] = []

    # token helpers
    @property
    def tok(self) -> _Tok:
        return self.toks[self.pos]

    def take(self) -> _Tok:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, text: str | None = None) -> _Tok:
        tok = self.tok
        if tok.kind != kind or (text is not None and tok.text != text):
            want = repr(text) if text else kind
            got = repr(tok.text) if tok.text else "end of input"
            raise ChartSyntaxError(f"expected {want}, found {got}", tok.line, want)
        return self.take()

    def keyword(self, word: str) -> bool:
        return self.tok.kind == "ident" and self.tok.text == word

    def name_token(self, what: str, dotted: bool = True) -> str:
        tok = self.expect("ident")
        if tok.text in KEYWORDS:
            raise ChartSyntaxError(f"expected {what}, found keyword {tok.text!r}", tok.line, what)
        if not dotted and "." in tok.text:
            raise ChartSyntaxError(f"{what} may not contain '.'", tok.line, what)
        return tok.text

    def literal(self) -> Literal:
        tok = self.tok
        if tok.kind in ("string", "number") or (tok.kind == "ident" and tok.text in ("true", "false")):
            self.take()
            return parse_literal(tok.text)
        raise ChartSyntaxError(f"expected literal, found {tok.text!r}", tok.line, "literal")

    def action_list(self) -> tuple[Action, ...]:
        if not self.keyword("do"):
            return ()
        self.take()
        actions = [self.assignment()]
        while self.tok.kind == "op" and self.tok.text == ",":
            self.take()
            actions.append(self.assignment())
        return tuple(actions)

    def assignment(self) -> Action:
        name = self.name_token("signal name", dotted=False)
        self.expect("op", "=")
        return Action(name, self.literal())

    def trigger(self) -> Trigger:
        if self.keyword("after"):
            self.take()
            tok = self.expect("duration")
            seconds = int(tok.text[:-1])
            if seconds <= 0:
                raise ChartSyntaxError("timeout must be at least 1s", tok.line, "positive duration")
            return Timeout(seconds)
        if self.keyword("on"):
            self.take()
            name = self.name_token("signal name", dotted=False)
            self.expect("op", "==")
            return SignalEvent(name, self.literal())
        raise ChartSyntaxError(f"expected 'on' or 'after', found {self.tok.text!r}", self.tok.line, "trigger")

    # grammar
    def parse(self) -> StateChart:
        self.statements(None, [""])
        self.expect("eof")
        if self.name is None:
            raise ChartSyntaxError("missing 'chart <name>' header", 1, "chart")
        if self.initial is None:
            raise ChartSyntaxError("missing 'initial <state>'", None, "initial")
        return self.build()

    def statements(self, owner: tuple[_MutState, str] | None, scopes: list[str]) -> None:
        while True:
            tok = self.tok
            if tok.kind == "eof" or (tok.kind == "op" and tok.text == "}"):
                return
            if tok.kind != "ident":
                raise ChartSyntaxError(f"expected statement, found {tok.text!r}", tok.line, "statement")
            word = tok.text
            if word == "state":
                self.state_decl(owner, scopes)
            elif word == "transition":
                self.take()
                src = self.name_token("source state")
                self.expect("op", "->")
                dst = self.name_token("target state")
                trig = self.trigger()
                self.pending.append(_PendingTransition(src, dst, scopes, trig, self.action_list(), tok.line))
            elif owner is not None and word in ("after", "on"):
                trig = self.trigger()
                self.expect("op", "->")
                dst = self.name_token("target state")
                self.pending.append(
                    _PendingTransition(owner[1], dst, scopes, trig, self.action_list(), tok.line)
                )
            elif owner is not None and word == "entry":
                self.take()
                owner[0].entry.append(self.assignment())
            elif owner is None and word == "chart":
                self.take()
                if self.name is not None:
                    raise ChartSyntaxError("duplicate 'chart' header", tok.line)
                self.name = self.name_token("chart name", dotted=False)
            elif owner is None and word == "initial":
                self.take()
                if self.initial is not None:
                    raise ChartSyntaxError("duplicate 'initial'", tok.line)
                self.initial = (self.name_token("initial state"), tok.line)
            elif owner is None and word == "default":
                self.take()
                action = self.assignment()
                self.defaults.append((action.signal_name, action.literal))
            else:
                raise ChartSyntaxError(f"unexpected {word!r}", tok.line, "statement")

    def state_decl(self, owner, scopes: list[str]) -> None:
        start = self.take()
        name = self.name_token("state name", dotted=False)
        label = None
        if self.tok.kind == "string":
            label = parse_literal(self.take().text)
        state = _MutState(name, label)
        siblings = owner[0].children if owner else self.roots
        if any(s.name == name for s in siblings):
            full = f"{owner[1]}.{name}" if owner else name
            raise DuplicateState(full, start.line)
        siblings.append(state)
        if self.tok.kind == "op" and self.tok.text == "{":
            self.take()
            full = f"{owner[1]}.{name}" if owner else name
            self.statements((state, full), [full + "."] + scopes)
            self.expect("op", "}")

    def build(self) -> StateChart:
        states = tuple(s.freeze() for s in self.roots)
        index: set[str] = set()

        def visit(items, prefix):
            for s in items:
                index.add(prefix + s.name)
                visit(s.children, prefix + s.name + ".")

        visit(states, "")

        def lookup(name: str, scopes: list[str], line: int) -> str:
            for scope in scopes:
                if scope + name in index:
                    return scope + name
            raise UnknownState(name, line)

        transitions = []
        for p in self.pending:
            src = p.source if p.source in index else lookup(p.source, p.scopes, p.line)
            dst = lookup(p.target, p.scopes, p.line)
            transitions.append(Transition(src, dst, p.trigger, p.actions))
        name, line = self.initial
        initial = lookup(name, [""], line)
        return StateChart(self.name, states, tuple(transitions), initial, tuple(self.defaults))


def parse_statechart(text: str) -> StateChart:
    return _Parser(text).parse()


def _fmt_actions(actions) -> str:
    if not actions:
        return ""
    return " do " + ", ".join(f"{a.signal_name} = {format_literal(a.literal)}" for a in actions)


def render_statechart(chart: StateChart) -> str:
    """Canonical DSL text; ``parse_statechart`` inverts it exactly."""
    lines = [f"chart {chart.name}", f"initial {chart.initial}"]
    lines += [f"default {name} = {format_literal(value)}" for name, value in chart.defaults]

    def emit(state: State, depth: int) -> None:
        pad = "  " * depth
        head = f"{pad}state {state.name}"
        if state.label is not None:
            head += " " + json.dumps(state.label)
        if not state.children and not state.entry_actions:
            lines.append(head)
            return
        lines.append(head + " {")
        for a in state.entry_actions:
            lines.append(f"{pad}  entry {a.signal_name} = {format_literal(a.literal)}")
        for child in state.children:
            emit(child, depth + 1)
        lines.append(pad + "}")

    for s in chart.states:
        emit(s, 0)
    for t in chart.transitions:
        if isinstance(t.trigger, Timeout):
            trig = f"after {t.trigger.seconds}s"
        else:
            trig = f"on {t.trigger.name} == {format_literal(t.trigger.literal)}"
        lines.append(f"transition {t.source} -> {t.target} {trig}{_fmt_actions(t.actions)}")
    return "\n".join(lines) + "\n"


def extract_signals(chart: StateChart) -> list[RawSignal]:
    """Candidate signals in first-occurrence order.

    States are visited depth-first in declaration order; for each state its
    entry actions come first, then the transitions leaving it (declaration
    order: trigger, then actions). Timeouts contribute nothing.
    """
    found: dict[str, list] = {}

    def note(name: str, locator, role: str) -> None:
        found.setdefault(name, []).append((locator, role))

    by_source: dict[str, list[int]] = {}
    for i, t in enumerate(chart.transitions):
        by_source.setdefault(t.source, []).append(i)
    for full, state in chart.state_index().items():
        for a in state.entry_actions:
            note(a.signal_name, ("state", full), "action")
        for i in by_source.get(full, ()):
            t = chart.transitions[i]
            if isinstance(t.trigger, SignalEvent):
                note(t.trigger.name, ("transition", i), "event")
            for a in t.actions:
                note(a.signal_name, ("transition", i), "action")
    return [RawSignal(name, tuple(occ)) for name, occ in found.items()]


def validate_reachability(chart: StateChart) -> list[str]:
    """States never active when starting from ``initial``, sorted."""
    index = chart.state_index()
    active: set[str] = set()
    seen_leaves: set[str] = set()
    queue: deque[str] = deque()

    def activate(name: str) -> None:
        leaf = chart.enter(name)
        active.update(chart.context_of(leaf))
        if leaf not in seen_leaves:
            seen_leaves.add(leaf)
            queue.append(leaf)

    activate(chart.initial)
    while queue:
        leaf = queue.popleft()
        for _, t in chart.enabled(leaf):
            activate(t.target)
    return sorted(set(index) - active)
