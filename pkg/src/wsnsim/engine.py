"""Deterministic discrete-event core: virtual clock, ordered event queue, named RNG streams."""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Callable, Optional


class SimulationError(Exception):
    """Runtime failure inside a simulation run."""


class ConfigError(SimulationError):
    """Invalid configuration or engine misuse (e.g. scheduling in the past)."""


@dataclass(slots=True)
class Event:
    """A pending occurrence; (fire_time, seq) is a strict total order."""

    fire_time: float
    seq: int
    kind: str
    node: Optional[int] = None
    fn: Optional[Callable[["Event"], None]] = None
    payload: object = None

    def __lt__(self, other: "Event") -> bool:
        return (self.fire_time, self.seq) < (other.fire_time, other.seq)


class RngStream:
    """Named random stream: identical (seed, stream_id) gives identical draws.

    Seeding goes through ``random.Random(str)`` which hashes the string with
    SHA-512, so sequences are stable across processes and platforms.
    """

    def __init__(self, seed: int, stream_id: str):
        self.seed = seed
        self.stream_id = stream_id
        self._rng = random.Random(f"{seed}/{stream_id}")

    def random(self) -> float:
        return self._rng.random()

    def uniform(self, lo: float, hi: float) -> float:
        return uniform(self, lo, hi)

    def randint(self, lo: int, hi: int) -> int:
        return self._rng.randint(lo, hi)


def uniform(stream: RngStream, lo: float, hi: float) -> float:
    """Draw from [lo, hi); degenerate interval returns lo."""
    if lo > hi:
        raise ConfigError(f"uniform bounds inverted: lo={lo} > hi={hi}")
    if lo == hi:
        return lo
    return lo + (hi - lo) * stream.random()


class Simulator:
    """Single-threaded event dispatcher owning the virtual clock.

    Events fire in (fire_time, seq) order; seq is assigned at scheduling
    time so equal-time events dispatch in scheduling order.  A `trace`
    callable, when set, receives one line per dispatched event.
    """

    def __init__(self, seed: int = 1):
        self.seed = seed
        self.now = 0.0
        self.trace: Optional[Callable[[str], None]] = None
        self._heap: list[Event] = []
        self._seq = 0
        self._streams: dict[str, RngStream] = {}

    def stream(self, stream_id: str) -> RngStream:
        st = self._streams.get(stream_id)
        if st is None:
            st = self._streams[stream_id] = RngStream(self.seed, stream_id)
        return st

    def uniform(self, stream_id: str, lo: float, hi: float) -> float:
        return uniform(self.stream(stream_id), lo, hi)

    def schedule(self, fire_time: float, kind: str,
                 fn: Optional[Callable[[Event], None]] = None,
                 node: Optional[int] = None, payload: object = None) -> Event:
        if fire_time < self.now:
            raise ConfigError(
                f"cannot schedule {kind!r} at t={fire_time} before clock t={self.now}")
        ev = Event(fire_time, self._seq, kind, node, fn, payload)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev

    def schedule_in(self, delay: float, kind: str,
                    fn: Optional[Callable[[Event], None]] = None,
                    node: Optional[int] = None, payload: object = None) -> Event:
        return self.schedule(self.now + delay, kind, fn, node, payload)

    def pending(self) -> int:
        return len(self._heap)

    def run_until(self, t_end: float) -> int:
        """Dispatch every event with fire_time <= t_end; clock ends at t_end."""
        if t_end < self.now:
            raise ConfigError(f"run_until({t_end}) behind clock t={self.now}")
        count = 0
        heap = self._heap
        while heap and heap[0].fire_time <= t_end:
            ev = heapq.heappop(heap)
            self.now = ev.fire_time
            if self.trace is not None:
                node = "-" if ev.node is None else ev.node
                self.trace(f"t={ev.fire_time:.9f} seq={ev.seq} kind={ev.kind} node={node}")
            if ev.fn is not None:
                ev.fn(ev)
            count += 1
        self.now = t_end
        return count
