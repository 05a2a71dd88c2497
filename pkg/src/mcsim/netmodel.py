"""Radio leg model (one per gNB-DU), two-state loss channel and traffic sources."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .engine import NS_PER_S, Simulator, round_ns

SPEED_OF_LIGHT = 299_792_458  # m/s


class RatKind(enum.Enum):
    TERRESTRIAL_NR = "terrestrial_nr"
    SATELLITE = "satellite"
    OTHER_TERRESTRIAL = "other_terrestrial"


class ChannelState(enum.Enum):
    GOOD = "good"
    BAD = "bad"


class DropReason(enum.Enum):
    LINK_DOWN = "link_down"
    OVERFLOW = "overflow"
    CHANNEL = "channel"


@dataclass
class GeChannel:
    """Gilbert-Elliott channel stepped once per transmission attempt."""

    p_gb: float = 0.0
    p_bg: float = 1.0
    loss_good: float = 0.0
    loss_bad: float = 1.0
    state: ChannelState = ChannelState.GOOD

    def __post_init__(self):
        for name in ("p_gb", "p_bg", "loss_good", "loss_bad"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.loss_good > self.loss_bad:
            raise ValueError(f"loss_good={self.loss_good} exceeds loss_bad={self.loss_bad}")
        if isinstance(self.state, str):
            self.state = ChannelState(self.state)

    @property
    def loss_probability(self) -> float:
        return self.loss_good if self.state is ChannelState.GOOD else self.loss_bad

    def stationary_bad(self) -> float:
        total = self.p_gb + self.p_bg
        if total == 0:
            return 0.0 if self.state is ChannelState.GOOD else 1.0
        return self.p_gb / total

    def mean_loss(self) -> float:
        pi_b = self.stationary_bad()
        return (1 - pi_b) * self.loss_good + pi_b * self.loss_bad


def channel_step(ch: GeChannel, rng) -> tuple[ChannelState, bool]:
    """Draw loss for the current state, then the state transition.

    Always consumes exactly two values from ``rng``: loss first, transition
    second.
    """
    lost = rng.random() < ch.loss_probability
    u = rng.random()
    if ch.state is ChannelState.GOOD:
        if u < ch.p_gb:
            ch.state = ChannelState.BAD
    elif u < ch.p_bg:
        ch.state = ChannelState.GOOD
    return ch.state, lost


@dataclass
class FlowGen:
    flow_id: str
    kind: str = "cbr"
    rate_pps: float = 100.0
    size_bytes: int = 1500
    start: int = 0
    stop: int | None = None

    def __post_init__(self):
        if self.kind not in ("cbr", "poisson"):
            raise ValueError(f"unknown traffic kind {self.kind!r}")
        if self.rate_pps <= 0:
            raise ValueError("rate_pps must be > 0")
        if self.size_bytes <= 0:
            raise ValueError("size_bytes must be > 0")
        if self.stop is not None and self.start > self.stop:
            raise ValueError("start must not exceed stop")


def next_arrival(gen: FlowGen, rng) -> tuple[int, int]:
    """Inter-arrival time in ns and packet size in bytes."""
    if gen.kind == "cbr":
        return round_ns(Fraction(NS_PER_S) / Fraction(gen.rate_pps)), gen.size_bytes
    return round_ns(rng.expovariate(gen.rate_pps) * NS_PER_S), gen.size_bytes


def propagation_delay(leg: "Leg") -> int:
    if leg.prop_override is not None:
        return int(leg.prop_override)
    return round_ns(Fraction(leg.distance_m) * NS_PER_S / SPEED_OF_LIGHT)


def serialization_delay(leg: "Leg", size_bits: int) -> int:
    return round_ns(Fraction(size_bits) * NS_PER_S / Fraction(leg.capacity_bps))


@dataclass
class LegCounters:
    """Cumulative per-leg PDU accounting."""

    packets_in: int = 0
    delivered: int = 0
    lost_channel: int = 0
    dropped_linkdown: int = 0
    dropped_overflow: int = 0


@dataclass
class LegWindow:
    """Counters for the current measurement window; reset by each report.

    A PDU is counted in the window where its fate is decided, so
    ``delivered_bits <= offered_bits`` holds per window.
    """

    offered_bits: int = 0
    delivered_bits: int = 0
    delivered_pdus: int = 0
    lost_pdus: int = 0
    delay_sum: int = 0
    depth_sum: int = 0
    depth_samples: int = 0
    down_seen: bool = False


@dataclass
class _InFlight:
    pdu: object
    enqueued: int
    start: int
    departure: int
    handle: object


class Leg:
    """A gNB-DU radio leg collapsed into one FIFO transmitter.

    Departure times are computed on enqueue (``max(now, busy_until) +
    serialization``), so only the arrival needs an event. The channel is
    stepped when that arrival fires; arrivals on a leg happen in FIFO order,
    so RNG consumption follows transmission order.
    """

    def __init__(
        self,
        sim: Simulator,
        leg_id: str,
        rat: RatKind = RatKind.TERRESTRIAL_NR,
        capacity_bps: float = 100e6,
        distance_m: float = 0.0,
        prop_override: int | None = None,
        channel: GeChannel | None = None,
        queue_cap: int = 1000,
        on_arrival: Callable | None = None,
    ):
        if capacity_bps <= 0:
            raise ValueError(f"leg {leg_id}: capacity_bps must be > 0")
        if distance_m < 0:
            raise ValueError(f"leg {leg_id}: distance_m must be >= 0")
        if queue_cap < 1:
            raise ValueError(f"leg {leg_id}: queue_cap must be >= 1")
        self.sim = sim
        self.leg_id = leg_id
        self.rat = rat
        self.capacity_bps = capacity_bps
        self.distance_m = distance_m
        self.prop_override = prop_override
        self.channel = channel or GeChannel()
        self.queue_cap = queue_cap
        self.up = True
        self.on_arrival = on_arrival
        self.on_drop: Callable | None = None
        self.prop_ns = propagation_delay(self)
        self.counters = LegCounters()
        self.window = LegWindow()
        self.busy_ns = 0
        self._rng = sim.rng(f"channel:{leg_id}")
        self._busy_until = 0
        self._flight: deque[_InFlight] = deque()
        self._departures: deque[int] = deque()
        self._ser_cache: dict[int, int] = {}

    def ser_ns(self, size_bytes: int) -> int:
        d = self._ser_cache.get(size_bytes)
        if d is None:
            d = self._ser_cache[size_bytes] = serialization_delay(self, size_bytes * 8)
        return d

    def queue_depth(self) -> int:
        """PDUs queued or in serialization at the current instant."""
        now = self.sim.now
        deps = self._departures
        while deps and deps[0] <= now:
            deps.popleft()
        return len(deps)

    def in_flight(self):
        """PDUs accepted by the leg whose arrival has not fired yet."""
        return [f.pdu for f in self._flight]

    def transmit(self, pdu):
        """Accept a PDU for transmission or drop it; returns the arrival event."""
        self.counters.packets_in += 1
        bits = pdu.payload_bytes * 8
        if not self.up:
            self._drop(pdu, DropReason.LINK_DOWN, bits)
            return None
        depth = self.queue_depth()
        w = self.window
        w.depth_sum += depth
        w.depth_samples += 1
        if depth >= self.queue_cap:
            self._drop(pdu, DropReason.OVERFLOW, bits)
            return None
        now = self.sim.now
        start = self._busy_until if self._busy_until > now else now
        departure = start + self.ser_ns(pdu.payload_bytes)
        self._busy_until = departure
        self._departures.append(departure)
        self.busy_ns += departure - start
        handle = self.sim.schedule_at(departure + self.prop_ns, self._arrive)
        self._flight.append(_InFlight(pdu, now, start, departure, handle))
        return handle

    def _drop(self, pdu, reason, bits):
        c = self.counters
        if reason is DropReason.LINK_DOWN:
            c.dropped_linkdown += 1
        elif reason is DropReason.OVERFLOW:
            c.dropped_overflow += 1
        else:
            c.lost_channel += 1
        self.window.offered_bits += bits
        self.window.lost_pdus += 1
        if self.on_drop is not None:
            self.on_drop(self, pdu, reason)

    def _arrive(self):
        f = self._flight.popleft()
        pdu = f.pdu
        _, lost = channel_step(self.channel, self._rng)
        if lost:
            self._drop(pdu, DropReason.CHANNEL, pdu.payload_bytes * 8)
            return
        bits = pdu.payload_bytes * 8
        self.counters.delivered += 1
        w = self.window
        w.offered_bits += bits
        w.delivered_bits += bits
        w.delivered_pdus += 1
        w.delay_sum += self.sim.now - f.enqueued
        if self.on_arrival is not None:
            self.on_arrival(self, pdu)

    def set_down(self):
        """Take the leg down: PDUs not fully serialized are dropped."""
        if not self.up:
            return
        self.up = False
        self.window.down_seen = True
        now = self.sim.now
        while self._flight and self._flight[-1].departure > now:
            f = self._flight.pop()
            self.sim.cancel(f.handle)
            self.busy_ns -= f.departure - max(f.start, now)
            self._drop(f.pdu, DropReason.LINK_DOWN, f.pdu.payload_bytes * 8)
        while self._departures and self._departures[-1] > now:
            self._departures.pop()
        self._busy_until = now

    def set_up(self):
        self.up = True

    def busy_within(self, t_end: int) -> int:
        """Transmitter busy time in [0, t_end]."""
        busy = self.busy_ns
        for f in self._flight:
            if f.departure > t_end:
                busy -= f.departure - max(f.start, t_end)
        return busy

    def __repr__(self):
        return f"Leg({self.leg_id!r}, {self.rat.value}, {self.capacity_bps:g} bps, up={self.up})"
