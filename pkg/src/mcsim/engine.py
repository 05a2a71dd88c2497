"""Deterministic discrete-event core.

Time is an integer count of nanoseconds. Events are ordered by
``(fire_at, seq)`` where ``seq`` is a per-run insertion counter, so two runs
that schedule the same things in the same order process them identically.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from fractions import Fraction
from typing import Any, Callable

NS_PER_US = 1_000
NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000

_PENDING, _FIRED, _CANCELLED = 0, 1, 2


class SimError(ValueError):
    """Raised for invalid use of the simulator (negative delays, time travel)."""


def round_ns(value) -> int:
    """Round a non-negative quantity of nanoseconds to an int, ties up.

    Accepts ints, floats and Fractions. Floats are converted exactly so the
    result does not depend on binary representation quirks of the division
    that produced them.
    """
    if isinstance(value, int):
        return value
    q = Fraction(value)
    return (2 * q.numerator + q.denominator) // (2 * q.denominator)


def seconds(value: float) -> int:
    """Seconds to integer nanoseconds."""
    return round_ns(Fraction(value) * NS_PER_S)


def stream_seed(master_seed: int, stream_id: str) -> int:
    digest = hashlib.sha256(f"{master_seed}/{stream_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class Event:
    __slots__ = ("fire_at", "seq", "action", "args", "_state", "_owner")

    def __init__(self, fire_at, seq, action, args, owner):
        self.fire_at = fire_at
        self.seq = seq
        self.action = action
        self.args = args
        self._state = _PENDING
        self._owner = owner

    @property
    def pending(self) -> bool:
        return self._state == _PENDING

    def __repr__(self):
        name = getattr(self.action, "__qualname__", type(self.action).__name__)
        return f"Event(fire_at={self.fire_at}, seq={self.seq}, action={name})"


class Simulator:
    """Event queue, virtual clock and named RNG streams for one run."""

    def __init__(self, master_seed: int = 0, trace: Callable[[str], Any] | None = None):
        self.master_seed = master_seed
        self._now = 0
        self._seq = 0
        self._heap: list[tuple[int, int, Event]] = []
        self._streams: dict[str, random.Random] = {}
        self._trace = trace
        self.processed = 0

    @property
    def now(self) -> int:
        return self._now

    def schedule(self, delay: int, action: Callable, *args) -> Event:
        if delay < 0:
            raise SimError(f"negative delay {delay}")
        return self._push(self._now + int(delay), action, args)

    def schedule_at(self, fire_at: int, action: Callable, *args) -> Event:
        if fire_at < self._now:
            raise SimError(f"cannot schedule at {fire_at} < now {self._now}")
        return self._push(int(fire_at), action, args)

    def _push(self, fire_at, action, args):
        ev = Event(fire_at, self._seq, action, args, self)
        self._seq += 1
        heapq.heappush(self._heap, (fire_at, ev.seq, ev))
        return ev

    def cancel(self, handle) -> bool:
        """Tombstone a pending event. Returns False for anything not pending."""
        if not isinstance(handle, Event) or handle._owner is not self:
            return False
        if handle._state != _PENDING:
            return False
        handle._state = _CANCELLED
        return True

    def run_until(self, t_end: int) -> int:
        """Process every event with ``fire_at <= t_end``; leave the clock at t_end."""
        if t_end < self._now:
            raise SimError(f"run_until({t_end}) is before now ({self._now})")
        heap = self._heap
        trace = self._trace
        count = 0
        while heap and heap[0][0] <= t_end:
            fire_at, seq, ev = heapq.heappop(heap)
            if ev._state != _PENDING:
                continue
            ev._state = _FIRED
            self._now = fire_at
            if trace is not None:
                name = getattr(ev.action, "__qualname__", type(ev.action).__name__)
                trace(f"{fire_at}\t{seq}\t{name}")
            ev.action(*ev.args)
            count += 1
        self._now = t_end
        self.processed += count
        return count

    def pending_count(self) -> int:
        return sum(1 for _, _, ev in self._heap if ev._state == _PENDING)

    def rng(self, stream_id: str) -> random.Random:
        """The generator for ``stream_id``, seeded from (master_seed, stream_id)."""
        stream = self._streams.get(stream_id)
        if stream is None:
            stream = random.Random(stream_seed(self.master_seed, stream_id))
            self._streams[stream_id] = stream
        return stream
