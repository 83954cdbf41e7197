"""Monitoring events and the append-only monitor log.

One event per line, space separated::

    INVOKE <provider-id> <at-ms> <response-ms> <success:0|1> <measured-at-ms>
    RATE <provider-id> <at-ms> <rating-decimal>
    STATE <provider-id> <at-ms> <available|unavailable>
"""

from __future__ import annotations

import bisect
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from ..errors import InvalidEvent


@dataclass(frozen=True)
class InvokeEvent:
    provider_id: str
    at: int
    response_ms: int
    success: bool
    measured_at: int

    def to_line(self) -> str:
        return f"INVOKE {self.provider_id} {self.at} {self.response_ms} {int(self.success)} {self.measured_at}"


@dataclass(frozen=True)
class RateEvent:
    provider_id: str
    at: int
    rating: float

    def to_line(self) -> str:
        return f"RATE {self.provider_id} {self.at} {self.rating!r}"


@dataclass(frozen=True)
class StateEvent:
    provider_id: str
    at: int
    available: bool

    def to_line(self) -> str:
        return f"STATE {self.provider_id} {self.at} {'available' if self.available else 'unavailable'}"


MonitorEvent = Union[InvokeEvent, RateEvent, StateEvent]


def check_event(event: MonitorEvent) -> MonitorEvent:
    """Range-check an event, normalising numeric field types."""
    if not event.provider_id or any(ch.isspace() for ch in event.provider_id):
        raise InvalidEvent(f"bad provider id {event.provider_id!r}")
    if isinstance(event, InvokeEvent):
        if event.response_ms < 0:
            raise InvalidEvent(f"negative response time {event.response_ms}")
        return InvokeEvent(event.provider_id, int(event.at), int(event.response_ms), bool(event.success),
                           int(event.measured_at))
    if isinstance(event, RateEvent):
        rating = float(event.rating)
        if not 0.0 <= rating <= 5.0:
            raise InvalidEvent(f"rating {event.rating} outside [0, 5]")
        return RateEvent(event.provider_id, int(event.at), rating)
    if isinstance(event, StateEvent):
        return StateEvent(event.provider_id, int(event.at), bool(event.available))
    raise InvalidEvent(f"not a monitor event: {event!r}")


def parse_event(line: str) -> MonitorEvent:
    parts = line.split()
    if not parts:
        raise InvalidEvent("empty monitor line")
    kind, args = parts[0], parts[1:]
    try:
        if kind == "INVOKE" and len(args) == 5:
            if args[3] not in ("0", "1"):
                raise InvalidEvent(f"success flag must be 0 or 1: {line!r}")
            ev = InvokeEvent(args[0], int(args[1]), int(args[2]), args[3] == "1", int(args[4]))
        elif kind == "RATE" and len(args) == 3:
            ev = RateEvent(args[0], int(args[1]), float(args[2]))
        elif kind == "STATE" and len(args) == 3:
            if args[2] not in ("available", "unavailable"):
                raise InvalidEvent(f"state must be available or unavailable: {line!r}")
            ev = StateEvent(args[0], int(args[1]), args[2] == "available")
        else:
            raise InvalidEvent(f"unrecognised monitor line {line!r}")
    except ValueError as exc:
        raise InvalidEvent(f"bad number in monitor line {line!r}") from exc
    return check_event(ev)


class MonitorLog:
    """Append-only event store, indexed per provider and ordered by (at, arrival).

    With a ``path`` every accepted event is also appended to that file.
    """

    def __init__(self, path: str | Path | None = None):
        self._lock = threading.Lock()
        self._seq = 0
        self._events: list[MonitorEvent] = []
        self._by_provider: dict[str, list[tuple[int, int, MonitorEvent]]] = {}
        self.path = Path(path) if path is not None else None

    def append(self, event: MonitorEvent) -> MonitorEvent:
        event = check_event(event)
        with self._lock:
            self._seq += 1
            self._events.append(event)
            rows = self._by_provider.setdefault(event.provider_id, [])
            bisect.insort(rows, (event.at, self._seq, event), key=lambda r: (r[0], r[1]))
            if self.path is not None:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(event.to_line() + "\n")
        return event

    def __len__(self) -> int:
        return len(self._events)

    def events(self) -> list[MonitorEvent]:
        """All events in arrival order."""
        with self._lock:
            return list(self._events)

    def events_for(self, provider_id: str) -> tuple[MonitorEvent, ...]:
        with self._lock:
            return tuple(r[2] for r in self._by_provider.get(provider_id, ()))

    def snapshot(self, provider_ids) -> dict[str, tuple[MonitorEvent, ...]]:
        with self._lock:
            return {pid: tuple(r[2] for r in self._by_provider.get(pid, ())) for pid in provider_ids}

    def to_lines(self) -> list[str]:
        return [e.to_line() for e in self.events()]

    @classmethod
    def replay(cls, path: str | Path) -> "MonitorLog":
        log = cls()
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            if raw.strip():
                log.append(parse_event(raw))
        log.path = Path(path)
        return log
