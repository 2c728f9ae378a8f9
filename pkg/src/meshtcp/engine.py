"""Deterministic discrete-event core: ordered event queue, named seeded
random streams, and the append-only run trace."""

from __future__ import annotations

import hashlib
import heapq
import math
import random
from enum import Enum
from typing import Iterator, NamedTuple

from .errors import ContractError


class EventKind(Enum):
    SEGMENT_ARRIVAL = "segment_arrival"
    TIMER_EXPIRY = "timer_expiry"
    CHANNEL_FREE = "channel_free"
    APP_TICK = "app_tick"
    SAMPLE_TICK = "sample_tick"


class EventQueue:
    """Priority queue ordered by (time, insertion counter).

    The insertion counter gives simultaneous events a total order (the
    order they were scheduled in), which keeps runs reproducible.
    """

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, EventKind, object]] = []
        self._counter = 0
        self._watermark = 0.0  # time of the last pop

    def push(self, time: float, kind: EventKind, payload: object = None) -> None:
        if time < self._watermark:
            raise ContractError(
                f"event scheduled in the past: t={time} < clock {self._watermark}"
            )
        heapq.heappush(self._heap, (time, self._counter, kind, payload))
        self._counter += 1

    def pop(self) -> tuple[float, EventKind, object]:
        time, _, kind, payload = heapq.heappop(self._heap)
        self._watermark = time
        return time, kind, payload

    def peek_time(self) -> float:
        return self._heap[0][0]

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)


class TraceKind(Enum):
    SEND = "SEND"
    DELIVER = "DELIVER"
    DROP_WIRELESS = "DROP_WIRELESS"
    DROP_QUEUE = "DROP_QUEUE"
    RETX = "RETX"
    RTO = "RTO"
    CWND_SAMPLE = "CWND_SAMPLE"
    PHASE_CHANGE = "PHASE_CHANGE"
    STALE_ACK = "STALE_ACK"
    SPURIOUS_RTO = "SPURIOUS_RTO"


class TraceRecord(NamedTuple):
    time: float
    kind: TraceKind
    flow_id: int
    seq: int
    value: int | float | str


def _format_value(value: int | float | str) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    return f"{value:.9f}"


class RunTrace:
    """Append-only, time-ordered record of everything a run did.

    Segment records (SEND/RETX/DELIVER/DROP_*) put "data" or "ack" in the
    value column. CWND_SAMPLE records put cwnd in the value column and the
    concurrent ssthresh in the seq column, so the whole window trajectory
    is recoverable from the trace alone.
    """

    def __init__(self) -> None:
        self.records: list[TraceRecord] = []
        self._last_time = 0.0

    def add(
        self,
        time: float,
        kind: TraceKind,
        flow_id: int,
        seq: int,
        value: int | float | str,
    ) -> None:
        if time < self._last_time:
            raise ContractError(
                f"trace times must be non-decreasing: {time} < {self._last_time}"
            )
        self._last_time = time
        self.records.append(TraceRecord(time, kind, flow_id, seq, value))

    def export(self) -> str:
        lines = [
            f"{r.time:.9f}\t{r.kind.value}\t{r.flow_id}\t{r.seq}\t{_format_value(r.value)}"
            for r in self.records
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)


class RngStream:
    """Named, seeded pseudo-random stream.

    The generator is seeded from sha256(seed, name), so the same
    (seed, name, draw index) always yields the same value and adding a new
    named stream never perturbs an existing one.
    """

    def __init__(self, seed: int, name: str = "") -> None:
        self.seed = seed
        self.name = name
        digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
        self._rng = random.Random(int.from_bytes(digest[:8], "big"))

    def split(self, name: str) -> "RngStream":
        child = f"{self.name}/{name}" if self.name else name
        return RngStream(self.seed, child)

    def uniform(self) -> float:
        return self._rng.random()

    def exponential(self, rate: float) -> float:
        if rate <= 0:
            raise ContractError(f"exponential rate must be positive, got {rate}")
        return -math.log(1.0 - self._rng.random()) / rate


def run_until(world, t_end: float) -> RunTrace:
    """Dispatch events in order until the queue empties or time passes t_end."""
    events = world.events
    while events and events.peek_time() <= t_end:
        time, kind, payload = events.pop()
        world.clock = time
        try:
            world.handle(time, kind, payload)
        except ContractError as exc:
            raise ContractError(
                f"dispatch failed at t={time:.9f} ({kind.value}): {exc}"
            ) from exc
    return world.trace
