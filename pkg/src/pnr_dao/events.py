"""Append-only structured event log.

State machines emit one record per mutation. Records are rendered as
line-delimited JSON with sorted keys so identical runs produce identical
bytes.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterator


def _plain(value: Any) -> Any:
    if isinstance(value, (bytes, bytearray)):
        return value.hex()
    if isinstance(value, enum.Enum):
        return value.name if isinstance(value.value, int) else value.value
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, dict):
        return {str(_plain(k)): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        items = [_plain(v) for v in value]
        return sorted(items) if isinstance(value, (set, frozenset)) else items
    return value


@dataclass(frozen=True)
class Event:
    seq: int
    time: int
    module: str
    kind: str
    fields: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "t": self.time, "module": self.module,
             "kind": self.kind, "fields": self.fields},
            sort_keys=True, separators=(",", ":"),
        )


class EventLog:
    """Dense, strictly increasing sequence of events.

    ``clock`` is the logical time stamped onto new records; the simulator
    keeps it in step with its own clock.
    """

    def __init__(self) -> None:
        self._events: list[Event] = []
        self.clock = 0

    def emit(self, module: str, kind: str, /, **fields: Any) -> Event:
        ev = Event(len(self._events), self.clock, module, kind,
                   {k: _plain(v) for k, v in fields.items()})
        self._events.append(ev)
        return ev

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self._events)

    def __getitem__(self, i):
        return self._events[i]

    def of_kind(self, kind: str) -> list[Event]:
        return [e for e in self._events if e.kind == kind]

    def dumps(self) -> str:
        return "".join(e.to_json() + "\n" for e in self._events)
