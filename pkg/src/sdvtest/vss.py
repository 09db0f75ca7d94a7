"""Flat-text VSS catalog: loading, validation, and lookup.

One node per line::

    Vehicle.Cabin.HVAC.AmbientAirTemperature sensor float celsius # outside air
    Vehicle.Cabin branch # optional, branches are synthesized from leaves

``#`` starts a comment; the text after it becomes the node description.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType

from sdvtest.errors import ParseError, SdvTestError

KINDS = ("branch", "sensor", "actuator", "attribute")
DATATYPES = ("boolean", "int32", "float", "string")

_SEGMENT = re.compile(r"[A-Za-z][A-Za-z0-9]*\Z")


class CatalogError(SdvTestError):
    pass


class MalformedLine(ParseError, CatalogError):
    def __init__(self, message: str, line: int, source: str = "<text>"):
        self.source = source
        super().__init__(f"{source}: {message}", line)


class DuplicatePath(CatalogError):
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"{path} declared twice with differing fields")


class BranchLeafConflict(CatalogError):
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"{path} is used both as a branch and as a leaf")


class NotFound(CatalogError, KeyError):
    def __init__(self, path: str, ancestor: str | None):
        self.path = path
        self.ancestor = ancestor
        super().__init__(path)

    def __str__(self) -> str:
        return f"{self.path} not in catalog (nearest existing ancestor: {self.ancestor or 'none'})"


@dataclass(frozen=True)
class SignalNode:
    path: str
    kind: str
    datatype: str | None = None
    unit: str | None = None
    description: str | None = None

    @property
    def is_leaf(self) -> bool:
        return self.kind != "branch"

    @property
    def name(self) -> str:
        return self.path.rsplit(".", 1)[-1]


@dataclass(frozen=True)
class Catalog:
    """Immutable path-keyed node collection.

    Equality compares nodes only; ``overlays`` records where they came from.
    """

    nodes: Mapping[str, SignalNode]
    overlays: tuple[str, ...] = field(default=(), compare=False)

    def __contains__(self, path: object) -> bool:
        return path in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Catalog):
            return NotImplemented
        return dict(self.nodes) == dict(other.nodes)

    def __hash__(self) -> int:
        return hash(frozenset(self.nodes.items()))

    def resolve(self, path: str) -> SignalNode:
        return resolve(self, path)

    def leaf(self, path: str) -> SignalNode:
        """Resolve ``path`` and insist it carries a value."""
        node = resolve(self, path)
        if not node.is_leaf:
            raise NotFound(path, path)
        return node

    def leaves(self) -> list[SignalNode]:
        return leaves(self)


def _parse_line(raw: str, lineno: int, source: str) -> SignalNode | None:
    body, sep, comment = raw.partition("#")
    tokens = body.split()
    if not tokens:
        return None
    description = comment.strip() or None
    path = tokens[0]
    segments = path.split(".")
    if not all(_SEGMENT.match(s) for s in segments):
        raise MalformedLine(f"invalid path {path!r}", lineno, source)
    if len(tokens) < 2:
        raise MalformedLine(f"missing kind for {path}", lineno, source)
    kind = tokens[1]
    if kind not in KINDS:
        raise MalformedLine(f"unknown kind {kind!r}", lineno, source)
    if kind == "branch":
        if len(tokens) > 2:
            raise MalformedLine("branches take no datatype or unit", lineno, source)
        return SignalNode(path, kind, description=description)
    if len(tokens) < 3:
        raise MalformedLine(f"missing datatype for {path}", lineno, source)
    datatype = tokens[2]
    if datatype not in DATATYPES:
        raise MalformedLine(f"unknown datatype {datatype!r}", lineno, source)
    if len(tokens) > 4:
        raise MalformedLine(f"unexpected tokens {' '.join(tokens[4:])!r}", lineno, source)
    unit = tokens[3] if len(tokens) == 4 else None
    return SignalNode(path, kind, datatype, unit, description)


def load_catalog(sources: Iterable[str], names: Iterable[str] | None = None) -> Catalog:
    """Build a catalog from catalog documents given as text.

    Later documents may add paths but never redefine one with different
    fields. Result does not depend on document order.
    """
    texts = list(sources)
    labels = list(names) if names is not None else [f"<source {i}>" for i in range(len(texts))]
    if len(labels) != len(texts):
        raise ValueError("names must match sources one-to-one")

    declared: dict[str, SignalNode] = {}
    for text, label in zip(texts, labels):
        for lineno, raw in enumerate(text.splitlines(), start=1):
            node = _parse_line(raw.rstrip("\r"), lineno, label)
            if node is None:
                continue
            previous = declared.get(node.path)
            if previous is None:
                declared[node.path] = node
            elif previous != node:
                if previous.is_leaf != node.is_leaf:
                    raise BranchLeafConflict(node.path)
                raise DuplicatePath(node.path)

    nodes = dict(declared)
    for node in declared.values():
        segments = node.path.split(".")
        for i in range(1, len(segments)):
            prefix = ".".join(segments[:i])
            existing = nodes.get(prefix)
            if existing is None:
                nodes[prefix] = SignalNode(prefix, "branch")
            elif existing.is_leaf:
                raise BranchLeafConflict(prefix)

    ordered = {path: nodes[path] for path in sorted(nodes)}
    return Catalog(MappingProxyType(ordered), tuple(labels))


def load_catalog_files(paths: Iterable[str | Path]) -> Catalog:
    paths = [Path(p) for p in paths]
    return load_catalog([p.read_text(encoding="utf-8") for p in paths], [p.name for p in paths])


def resolve(catalog: Catalog, path: str) -> SignalNode:
    """Exact, case-sensitive lookup; ``NotFound`` names the nearest ancestor present."""
    node = catalog.nodes.get(path)
    if node is not None:
        return node
    segments = path.split(".")
    ancestor = None
    for i in range(len(segments) - 1, 0, -1):
        prefix = ".".join(segments[:i])
        if prefix in catalog.nodes:
            ancestor = prefix
            break
    raise NotFound(path, ancestor)


def leaves(catalog: Catalog) -> list[SignalNode]:
    return [n for path, n in sorted(catalog.nodes.items()) if n.is_leaf]
