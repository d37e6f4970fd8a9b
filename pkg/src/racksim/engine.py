"""Simulation clock, event queue, and named random streams.

The event loop is a plain binary heap keyed on (time, insertion sequence), so
two events scheduled for the same instant dispatch in insertion order. Times
are floats in microseconds. Handlers are callables taking (now, arg); they
are stored in the heap entry but never compared (the sequence number is
unique), which keeps heap operations cheap.

Random streams are derived from (seed, stream name) via SHA-256, so stream
draws are reproducible across runs and platforms and adding draws to one
stream never perturbs another.
"""

from __future__ import annotations

import hashlib
import heapq
import random


class SimulationError(Exception):
    """Contract violation inside a run (e.g. scheduling into the past)."""


class RngStreams:
    """Lazily-created named random.Random streams for one run."""

    __slots__ = ("seed", "_streams")

    def __init__(self, seed: int):
        self.seed = seed
        self._streams: dict[str, random.Random] = {}

    def get(self, name: str) -> random.Random:
        rnd = self._streams.get(name)
        if rnd is None:
            digest = hashlib.sha256(f"{self.seed}:{name}".encode()).digest()
            rnd = random.Random(int.from_bytes(digest[:16], "big"))
            self._streams[name] = rnd
        return rnd


class EventLoop:
    """Deterministic discrete-event loop over a microsecond clock."""

    __slots__ = ("now", "_heap", "_seq")

    def __init__(self):
        self.now = 0.0
        self._heap: list = []
        self._seq = 0

    def schedule(self, time: float, fn, arg=None) -> None:
        if time < self.now:
            raise SimulationError(
                f"cannot schedule at {time} before current time {self.now}"
            )
        heapq.heappush(self._heap, (time, self._seq, fn, arg))
        self._seq += 1

    def run_until(self, end: float) -> None:
        """Dispatch every event with time <= end; an empty queue before end
        is normal termination."""
        heap = self._heap
        pop = heapq.heappop
        while heap and heap[0][0] <= end:
            time, _, fn, arg = pop(heap)
            self.now = time
            fn(time, arg)
        if end > self.now:
            self.now = end

    def pending(self) -> int:
        return len(self._heap)
