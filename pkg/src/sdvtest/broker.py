"""In-memory VSS datapoint broker driven by an integer-second virtual clock.

Subscribers run synchronously inside :meth:`Broker.set`, and timer callbacks
run inside :meth:`Broker.advance`, so a scenario is a single deterministic
sequence of calls with no wall-clock waits.
"""

from __future__ import annotations

import heapq
import itertools
from collections.abc import Callable
from dataclasses import dataclass

from sdvtest.errors import SdvTestError
from sdvtest.literals import DEFAULTS, Literal, coerce, format_literal, same_literal
from sdvtest.vss import Catalog


class BrokerError(SdvTestError):
    pass


class UnknownPath(BrokerError, KeyError):
    def __init__(self, path: str):
        self.path = path
        super().__init__(path)

    def __str__(self) -> str:
        return f"{self.path} is not a signal of the loaded catalog"


class TypeMismatch(BrokerError, TypeError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class DuplicateTimerId(BrokerError):
    pass


@dataclass(frozen=True)
class DataPoint:
    path: str
    value: Literal
    updated_at: int


@dataclass(frozen=True)
class ChangeEvent:
    path: str
    old_value: Literal
    new_value: Literal
    at: int

    def log_line(self) -> str:
        return f"t={self.at} {self.path} {_fmt(self.old_value)}->{_fmt(self.new_value)}"


def _fmt(value) -> str:
    return format_literal(value) if isinstance(value, (bool, int, float)) else str(value)


class VirtualClock:
    """Integer-second clock with a timer heap.

    Ties at the same fire time fire in schedule order.
    """

    def __init__(self):
        self.now = 0
        self._heap: list[tuple[int, int, str]] = []
        self._pending: dict[str, tuple[int, int, Callable[[], None] | None, object]] = {}
        self._seq = itertools.count()

    def schedule(self, delay: int, timer_id: str, callback=None, owner=None) -> int:
        if not isinstance(delay, int) or isinstance(delay, bool) or delay <= 0:
            raise ValueError("timer delay must be a positive whole number of seconds")
        if timer_id in self._pending:
            raise DuplicateTimerId(timer_id)
        fire_at = self.now + delay
        seq = next(self._seq)
        self._pending[timer_id] = (fire_at, seq, callback, owner)
        heapq.heappush(self._heap, (fire_at, seq, timer_id))
        return fire_at

    def cancel(self, timer_id: str) -> bool:
        return self._pending.pop(timer_id, None) is not None

    def pending(self) -> list[tuple[int, str, object]]:
        return sorted((at, tid, owner) for tid, (at, _, _, owner) in self._pending.items())

    def advance(self, duration: int) -> list[str]:
        if not isinstance(duration, int) or isinstance(duration, bool) or duration < 0:
            raise ValueError("advance needs a non-negative whole number of seconds")
        target = self.now + duration
        fired: list[str] = []
        while self._heap and self._heap[0][0] <= target:
            fire_at, seq, timer_id = heapq.heappop(self._heap)
            entry = self._pending.get(timer_id)
            if entry is None or entry[1] != seq:
                continue  # cancelled or rescheduled under the same id
            del self._pending[timer_id]
            self.now = fire_at
            fired.append(timer_id)
            if entry[2] is not None:
                entry[2]()
        self.now = target
        return fired


class Broker:
    """Typed get/set over the leaves of a catalog, plus change subscriptions."""

    def __init__(self, catalog: Catalog):
        self.catalog = catalog
        self.clock = VirtualClock()
        self._values: dict[str, DataPoint] = {}
        self._subscribers: dict[str, list[Callable[[ChangeEvent], None]]] = {}
        self._log: list[str] = []

    @property
    def now(self) -> int:
        return self.clock.now

    def _leaf(self, path: str):
        node = self.catalog.nodes.get(path)
        if node is None or not node.is_leaf:
            raise UnknownPath(path)
        return node

    def get(self, path: str) -> Literal:
        node = self._leaf(path)
        point = self._values.get(path)
        return point.value if point is not None else DEFAULTS[node.datatype]

    def datapoint(self, path: str) -> DataPoint | None:
        self._leaf(path)
        return self._values.get(path)

    def set(self, path: str, value: Literal) -> ChangeEvent | None:
        """Update a signal; returns ``None`` when the value is unchanged."""
        node = self._leaf(path)
        try:
            value = coerce(value, node.datatype)
        except TypeError as exc:
            raise TypeMismatch(path, str(exc)) from None
        old = self.get(path)
        if same_literal(old, value):
            return None
        self._values[path] = DataPoint(path, value, self.now)
        event = ChangeEvent(path, old, value, self.now)
        self._log.append(event.log_line())
        for callback in list(self._subscribers.get(path, ())):
            callback(event)
        return event

    def subscribe(self, path: str, callback: Callable[[ChangeEvent], None]) -> None:
        self._leaf(path)
        self._subscribers.setdefault(path, []).append(callback)

    def unsubscribe(self, path: str, callback) -> None:
        self._subscribers.get(path, []).remove(callback)

    def schedule(self, delay_seconds: int, timer_id: str, callback=None, owner=None) -> int:
        return self.clock.schedule(delay_seconds, timer_id, callback, owner)

    def cancel(self, timer_id: str) -> bool:
        return self.clock.cancel(timer_id)

    def advance(self, duration_seconds: int) -> list[str]:
        return self.clock.advance(duration_seconds)

    def record(self, path: str, old, new) -> None:
        """Append a pseudo-signal record (e.g. ``Cpds.Stage``) to the event log."""
        self._log.append(f"t={self.now} {path} {_fmt(old)}->{_fmt(new)}")

    @property
    def event_log(self) -> tuple[str, ...]:
        return tuple(self._log)

    def export_log(self) -> str:
        return "".join(line + "\n" for line in self._log)
