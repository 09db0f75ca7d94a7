"""Typed literal values as they appear in charts, steps, and event logs."""

from __future__ import annotations

import json
import re

Literal = bool | int | float | str

_INT = re.compile(r"[+-]?\d+\Z")
_FLOAT = re.compile(r"[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?\Z")

#: quoted string or a single whitespace-free token
LITERAL_PATTERN = r'"(?:[^"\\]|\\.)*"|\S+'


def parse_literal(token: str) -> Literal:
    """Parse ``true``/``false``, integers, floats, or a double-quoted string.

    Anything else is returned as a bare string so that string-typed leaves
    can be written without quotes.
    """
    if token == "true":
        return True
    if token == "false":
        return False
    if token.startswith('"'):
        try:
            value = json.loads(token)
        except json.JSONDecodeError as exc:
            raise ValueError(f"bad string literal {token!r}") from exc
        if not isinstance(value, str):
            raise ValueError(f"bad string literal {token!r}")
        return value
    if _INT.match(token):
        return int(token)
    if _FLOAT.match(token):
        return float(token)
    return token


def format_literal(value: Literal) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    return json.dumps(value)


def same_literal(a: Literal, b: Literal) -> bool:
    """Equality that does not conflate ``True`` with ``1``."""
    return type(a) is type(b) and a == b


def coerce(value: Literal, datatype: str) -> Literal:
    """Check ``value`` against a VSS datatype and return it in canonical form.

    Integers are widened for float leaves; every other mismatch raises
    ``TypeError``.
    """
    if datatype == "boolean":
        if isinstance(value, bool):
            return value
    elif datatype == "int32":
        if isinstance(value, int) and not isinstance(value, bool):
            if -(2**31) <= value < 2**31:
                return value
            raise TypeError(f"{value} out of int32 range")
    elif datatype == "float":
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif datatype == "string":
        if isinstance(value, str):
            return value
    raise TypeError(f"{format_literal(value)} is not a valid {datatype}")


DEFAULTS: dict[str, Literal] = {"boolean": False, "int32": 0, "float": 0.0, "string": ""}
