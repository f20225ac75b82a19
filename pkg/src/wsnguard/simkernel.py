"""Deterministic discrete-event engine.

Events are dispatched in ascending ``(fire_at, seq)`` order where ``seq`` is
a global insertion counter, so same-tick events run in the order they were
scheduled, including events scheduled during dispatch.
"""
from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field
from typing import Any, Callable

from .eventlog import EventLog


class EventKind(enum.IntEnum):
    PacketSend = 0
    PacketArrive = 1
    AckTimeout = 2
    TrafficTick = 3
    DetectorTick = 4
    BeaconTick = 5
    AttackStart = 6
    AttackEnd = 7
    MitigationApply = 8


class PastTime(ValueError):
    pass


class HandlerFault(RuntimeError):
    pass


@dataclass(order=True, frozen=True)
class SimEvent:
    fire_at: int
    seq: int
    kind: EventKind = field(compare=False)
    subject: Any = field(compare=False, default=None)


@dataclass(frozen=True)
class RunSummary:
    events: int
    clock: int
    digest: int


class Simulator:
    def __init__(self, log: EventLog | None = None) -> None:
        self.now = 0
        self.log = log if log is not None else EventLog()
        self._queue: list[SimEvent] = []
        self._seq = 0
        self._handlers: dict[EventKind, Callable[[SimEvent], None]] = {}
        self.processed = 0

    def on(self, kind: EventKind, handler: Callable[[SimEvent], None]) -> None:
        self._handlers[kind] = handler

    def schedule(self, fire_at: int, kind: EventKind, subject: Any = None) -> SimEvent:
        if fire_at < self.now:
            raise PastTime(f"cannot schedule at {fire_at}, clock is {self.now}")
        ev = SimEvent(fire_at, self._seq, kind, subject)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def pending(self) -> list[SimEvent]:
        return sorted(self._queue)

    def run(self, until: int) -> RunSummary:
        q = self._queue
        handlers = self._handlers
        n = 0
        while q and q[0].fire_at <= until:
            ev = heapq.heappop(q)
            self.now = ev.fire_at
            try:
                handler = handlers[ev.kind]
            except KeyError:
                raise HandlerFault(f"no handler registered for {ev.kind.name}") from None
            handler(ev)
            n += 1
        self.now = max(self.now, until)
        self.processed += n
        return RunSummary(n, self.now, self.log.digest)
