"""Map raw chart signal names onto catalog leaves.

The offline matcher scores token-set overlap (Jaccard) between the raw name
and each leaf's last path segment. Anything below the threshold comes back as
a :class:`Clarification` listing the best candidates instead of a guess.
"""

from __future__ import annotations

import json
import logging
import re
import urllib.request
from collections.abc import Iterable, Mapping as MappingABC
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

from sdvtest.errors import ParseError, SdvTestError
from sdvtest.statechart import RawSignal
from sdvtest.vss import Catalog, NotFound, SignalNode, leaves

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = Fraction(1, 2)

_WORD = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+")
_SEPARATORS = re.compile(r"[_.\-\s]+")


class MappingError(SdvTestError):
    pass


class OverrideInvalid(MappingError):
    def __init__(self, raw_name: str, path: str):
        self.raw_name = raw_name
        self.path = path
        super().__init__(f"override for {raw_name} points at {path}, which is not a catalog leaf")


class MissingPlaceholder(MappingError, KeyError):
    def __init__(self, slot: str):
        self.slot = slot
        super().__init__(slot)

    def __str__(self) -> str:
        return f"no fill provided for placeholder {self.slot}"


class BackendError(MappingError):
    pass


def tokenize(name: str) -> list[str]:
    """Lowercase word tokens of an identifier.

    >>> tokenize("HVACAutoOverride")
    ['hvac', 'auto', 'override']
    """
    tokens: list[str] = []
    for chunk in _SEPARATORS.split(name):
        tokens.extend(w.lower() for w in _WORD.findall(chunk))
    return tokens


def jaccard(a: Iterable[str], b: Iterable[str]) -> Fraction:
    a, b = set(a), set(b)
    union = a | b
    if not union:
        return Fraction(0)
    return Fraction(len(a & b), len(union))


def score(raw: str, leaf: SignalNode) -> Fraction:
    if not leaf.is_leaf:
        raise ValueError(f"{leaf.path} is a branch")
    return jaccard(tokenize(raw), tokenize(leaf.name))


@dataclass(frozen=True)
class Mapping:
    raw_name: str
    path: str
    score: Fraction
    method: str  # exact | similarity | manual | backend


@dataclass(frozen=True)
class Clarification:
    raw_name: str
    candidates: tuple[tuple[str, Fraction], ...]
    reason: str


def _ranked(raw: str, catalog: Catalog) -> list[tuple[Fraction, int, str]]:
    raw_tokens = set(tokenize(raw))
    ranked = []
    for leaf in leaves(catalog):
        overlap = len(raw_tokens & set(tokenize(leaf.path)))
        ranked.append((score(raw, leaf), overlap, leaf.path))
    # higher score, then larger full-path overlap, then smaller path
    ranked.sort(key=lambda r: (-r[0], -r[1], r[2]))
    return ranked


def map_signal(
    raw: RawSignal | str,
    catalog: Catalog,
    threshold: Fraction | float = DEFAULT_THRESHOLD,
    manual_overrides: MappingABC[str, str] | None = None,
) -> Mapping | Clarification:
    name = raw.name if isinstance(raw, RawSignal) else raw
    threshold = Fraction(threshold)
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    if manual_overrides and name in manual_overrides:
        path = manual_overrides[name]
        try:
            catalog.leaf(path)
        except NotFound:
            raise OverrideInvalid(name, path) from None
        return Mapping(name, path, Fraction(1), "manual")
    ranked = _ranked(name, catalog)
    if ranked and ranked[0][0] >= threshold:
        best, _, path = ranked[0]
        return Mapping(name, path, best, "exact" if best == 1 else "similarity")
    top = tuple((path, s) for s, _, path in ranked[:3])
    best = ranked[0][0] if ranked else Fraction(0)
    return Clarification(name, top, f"best score {best} below threshold {threshold}")


def map_signals(
    raws: Iterable[RawSignal | str],
    catalog: Catalog,
    threshold: Fraction | float = DEFAULT_THRESHOLD,
    manual_overrides: MappingABC[str, str] | None = None,
) -> list[Mapping | Clarification]:
    return [map_signal(r, catalog, threshold, manual_overrides) for r in raws]


def parse_overrides(text: str) -> dict[str, str]:
    """Two-column ``raw_name path`` table; ``#`` comments and blank lines skipped."""
    table: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 2:
            raise ParseError(f"expected 'raw_name path', got {body!r}", lineno)
        raw, path = parts
        if raw in table and table[raw] != path:
            raise ParseError(f"{raw} overridden twice", lineno)
        table[raw] = path
    return table


def render_overrides(table: MappingABC[str, str]) -> str:
    return "".join(f"{raw} {path}\n" for raw, path in table.items())


# --------------------------------------------------------------------------
# prompt templates

_SLOT = re.compile(r"\[[^\[\]\n]+\]")
PLACEHOLDERS = (
    "[diagram]",
    "[signal list from diagram]",
    "[VSS catalog]",
    "[Gherkin test case]",
    "[digital.auto test example]",
    "[VSS signals]",
)


class PromptTemplate:
    """Prompt text with bracketed slots such as ``[VSS catalog]``."""

    def __init__(self, task: str, template: str):
        if task not in ("extract", "map", "codegen"):
            raise ValueError(f"unknown prompt task {task!r}")
        self.task = task
        self.template = template

    @property
    def placeholders(self) -> list[str]:
        return [p for p in PLACEHOLDERS if p in self.template]

    @classmethod
    def shipped(cls, task: str) -> PromptTemplate:
        text = resources.files("sdvtest.data").joinpath("prompts", f"{task}.txt").read_text(encoding="utf-8")
        return cls(task, text)

    def __repr__(self) -> str:
        return f"PromptTemplate({self.task!r}, slots={self.placeholders})"


def render_prompt(template: PromptTemplate, fills: MappingABC[str, str]) -> str:
    text = template.template
    for slot in template.placeholders:
        if slot not in fills:
            raise MissingPlaceholder(slot)
    for slot in template.placeholders:
        text = text.replace(slot, fills[slot])
    return text


# --------------------------------------------------------------------------
# generation backends


class OfflineBackend:
    """Deterministic matcher; the default and the one every test uses."""

    name = "offline"

    def map_signals(self, raws, catalog, threshold=DEFAULT_THRESHOLD, overrides=None):
        return map_signals(raws, catalog, threshold, overrides)


class ExternalBackend:
    """Send the rendered mapping prompt to an HTTP endpoint.

    The request body is JSON ``{"task": "map", "prompt": ...}``. The reply is
    plain text, one ``raw_name path`` (or ``raw_name -> path``) per line; a
    bare path per line is matched to the signals positionally. Signals the
    reply leaves out, or maps to a non-leaf, become clarifications.
    """

    name = "external"

    def __init__(self, endpoint: str, timeout: float = 30.0):
        if not endpoint:
            raise ValueError("external backend needs an endpoint")
        self.endpoint = endpoint
        self.timeout = timeout

    def _post(self, prompt: str) -> str:
        body = json.dumps({"task": "map", "prompt": prompt}).encode("utf-8")
        request = urllib.request.Request(
            self.endpoint, data=body, headers={"Content-Type": "application/json"}, method="POST"
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                return response.read().decode("utf-8")
        except OSError as exc:
            raise BackendError(f"backend request to {self.endpoint} failed: {exc}") from exc

    def map_signals(self, raws, catalog, threshold=DEFAULT_THRESHOLD, overrides=None):
        names = [r.name if isinstance(r, RawSignal) else r for r in raws]
        overrides = overrides or {}
        pending = [n for n in names if n not in overrides]
        proposals: dict[str, str] = {}
        if pending:
            prompt = render_prompt(
                PromptTemplate.shipped("map"),
                {
                    "[signal list from diagram]": "\n".join(pending),
                    "[VSS catalog]": "\n".join(
                        f"{n.path} {n.kind} {n.datatype}" for n in leaves(catalog)
                    ),
                },
            )
            proposals = parse_backend_reply(self._post(prompt), pending)
        results: list[Mapping | Clarification] = []
        for name in names:
            if name in overrides:
                results.append(map_signal(name, catalog, threshold, overrides))
                continue
            path = proposals.get(name)
            node = catalog.nodes.get(path) if path else None
            if node is None or not node.is_leaf:
                ranked = _ranked(name, catalog)[:3]
                reason = "backend gave no mapping" if path is None else f"backend proposed unknown path {path}"
                results.append(Clarification(name, tuple((p, s) for s, _, p in ranked), reason))
            else:
                results.append(Mapping(name, path, score(name, node), "backend"))
        return results


def parse_backend_reply(reply: str, names: list[str]) -> dict[str, str]:
    lines = [l.strip() for l in reply.splitlines() if l.strip() and not l.strip().startswith("#")]
    proposals: dict[str, str] = {}
    positional = []
    for line in lines:
        parts = line.replace("->", " ").split()
        if len(parts) == 2 and parts[0] in names:
            proposals[parts[0]] = parts[1]
        elif len(parts) == 1:
            positional.append(parts[0])
    if not proposals and positional:
        proposals = {n: p for n, p in zip(names, positional) if p not in ("?", "-")}
    return proposals


def make_backend(kind: str, endpoint: str | None = None):
    if kind == "offline":
        return OfflineBackend()
    if kind == "external":
        return ExternalBackend(endpoint or "")
    raise ValueError(f"unknown backend {kind!r}")


def load_overrides(path: str | Path) -> dict[str, str]:
    return parse_overrides(Path(path).read_text(encoding="utf-8"))
