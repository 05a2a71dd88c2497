"""Common PDCP entity hosted in the CU.

Transmit side: sequence numbering, duplication, split scheduling, the
unacknowledged-SDU store and lossless leg switching. Receive side:
window-relative COUNT reconstruction, duplicate discard, in-order delivery
and the t-Reordering timer.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from ..engine import Simulator
from .bearer import BearerMode, DeficitRoundRobin, Duplicate, Single, Split

log = logging.getLogger(__name__)

SN_BITS = 18
SN_MOD = 1 << SN_BITS
WINDOW = 1 << (SN_BITS - 1)


@dataclass(frozen=True, slots=True)
class PdcpPdu:
    flow_id: str
    sn: int
    payload_bytes: int
    born_at: int
    leg_id: str

    def __post_init__(self):
        if not 0 <= self.sn < SN_MOD:
            raise ValueError(f"sn {self.sn} outside [0, 2^{SN_BITS})")
        if self.payload_bytes <= 0:
            raise ValueError("payload_bytes must be > 0")


@dataclass(slots=True)
class TxEntry:
    count: int
    flow_id: str
    payload_bytes: int
    born_at: int
    legs: set = field(default_factory=set)


class PdcpTx:
    """Transmit state of one bearer.

    ``unacked`` maps sn to the SDU and the legs it was sent on. Entries leave
    on ack, when they fall ``WINDOW`` counts behind ``next_count``, or when
    older than ``discard_timer`` (if set).
    """

    def __init__(self, mode: BearerMode, discard_timer: int | None = None):
        self.next_count = 0
        self.unacked: dict[int, TxEntry] = {}
        self._order: deque[TxEntry] = deque()  # send order; acked entries linger until purged
        self.discard_timer = discard_timer
        self.discarded = 0
        self.retransmissions = 0
        self.mode = mode
        self._drr: DeficitRoundRobin | None = None
        self.set_mode(mode)

    @property
    def next_sn(self) -> int:
        return self.next_count % SN_MOD

    def set_mode(self, mode: BearerMode):
        self.mode = mode
        self._drr = DeficitRoundRobin(mode.weights) if isinstance(mode, Split) else None

    def transmit(self, flow_id: str, payload_bytes: int, now: int) -> list[tuple[str, PdcpPdu]]:
        self._purge(now)
        count = self.next_count
        sn = count % SN_MOD
        self.next_count += 1
        mode = self.mode
        if isinstance(mode, Single):
            legs = (mode.leg,)
        elif isinstance(mode, Duplicate):
            legs = mode.leg_set
        else:
            legs = (self._drr.next_leg(),)
        entry = TxEntry(count, flow_id, payload_bytes, now, set(legs))
        self.unacked[sn] = entry
        self._order.append(entry)
        return [(leg, PdcpPdu(flow_id, sn, payload_bytes, now, leg)) for leg in legs]

    def ack(self, sn: int) -> None:
        self.unacked.pop(sn, None)

    def _purge(self, now: int):
        unacked = self.unacked
        order = self._order
        limit = self.next_count - WINDOW
        timer = self.discard_timer
        while order:
            e = order[0]
            sn = e.count % SN_MOD
            if unacked.get(sn) is not e:
                order.popleft()
            elif e.count <= limit or (timer is not None and now - e.born_at > timer):
                order.popleft()
                del unacked[sn]
                self.discarded += 1
            else:
                break

    def fast_switch(self, from_legs, to_leg: str, now: int | None = None) -> list[tuple[str, PdcpPdu]]:
        """Move the bearer onto ``to_leg`` and re-send what only the old legs carried.

        Every unacked SDU all of whose copies went to ``from_legs`` is
        re-emitted on ``to_leg`` with its original sn and birth time.
        """
        if isinstance(from_legs, str):
            from_legs = {from_legs}
        from_legs = set(from_legs) - {to_leg}
        if isinstance(self.mode, Single) and self.mode.leg == to_leg:
            return []
        if now is not None:
            self._purge(now)
        self.set_mode(Single(to_leg))
        if not from_legs:
            return []
        out = []
        for sn, e in self.unacked.items():
            if e.legs <= from_legs:
                e.legs.add(to_leg)
                out.append((to_leg, PdcpPdu(e.flow_id, sn, e.payload_bytes, e.born_at, to_leg)))
        self.retransmissions += len(out)
        return out


class PdcpRx:
    """Receive state of one bearer.

    Follows the PDCP receive procedure: RX_DELIV is the first COUNT not yet
    delivered, RX_NEXT the highest received plus one, RX_REORD the RX_NEXT
    captured when the timer started. On expiry everything held below
    RX_REORD is delivered (gaps are skipped and counted as lost), followed by
    any consecutive run from RX_REORD.
    """

    def __init__(
        self,
        sim: Simulator | None,
        t_reordering: int,
        on_deliver: Callable[[PdcpPdu], None] | None = None,
    ):
        self.sim = sim
        self.t_reordering = t_reordering
        self.on_deliver = on_deliver
        self.rx_deliv = 0
        self.rx_next = 0
        self.rx_reord: int | None = None
        self.held: dict[int, PdcpPdu] = {}
        self._seen = bytearray(WINDOW)
        self._timer = None
        self.delivered = 0
        self.duplicate_discards = 0
        self.late_discards = 0
        self.skipped = 0
        self.reordering_timeouts = 0

    def count_of(self, sn: int) -> int:
        diff = (sn - self.rx_deliv) % SN_MOD
        if diff < WINDOW:
            return self.rx_deliv + diff
        return self.rx_deliv + diff - SN_MOD

    @property
    def timer_running(self) -> bool:
        return self._timer is not None

    def receive(self, pdu: PdcpPdu) -> list[PdcpPdu]:
        c = self.count_of(pdu.sn)
        if c < self.rx_deliv:
            if c >= 0 and self._seen[c % WINDOW]:
                self.duplicate_discards += 1
            else:
                self.late_discards += 1
            return []
        if c in self.held:
            self.duplicate_discards += 1
            return []
        self.held[c] = pdu
        if c >= self.rx_next:
            self.rx_next = c + 1
        out: list[PdcpPdu] = []
        if c == self.rx_deliv:
            self._deliver_run(out)
        if self._timer is not None and self.rx_deliv >= self.rx_reord:
            self._stop_timer()
        if self._timer is None and self.rx_deliv < self.rx_next:
            self._start_timer()
        return out

    def t_reordering_expire(self) -> list[PdcpPdu]:
        self._timer = None
        out: list[PdcpPdu] = []
        if not self.held:
            return out
        self.reordering_timeouts += 1
        reord = self.rx_reord if self.rx_reord is not None else self.rx_next
        for c in sorted(k for k in self.held if k < reord):
            self._skip_to(c)
            self._deliver_one(c, out)
        self._skip_to(reord)
        self._deliver_run(out)
        if self.rx_deliv < self.rx_next:
            self._start_timer()
        return out

    def _skip_to(self, c: int):
        seen = self._seen
        while self.rx_deliv < c:
            seen[self.rx_deliv % WINDOW] = 0
            self.rx_deliv += 1
            self.skipped += 1

    def _deliver_one(self, c: int, out: list):
        pdu = self.held.pop(c)
        self._seen[c % WINDOW] = 1
        self.rx_deliv = c + 1
        self.delivered += 1
        out.append(pdu)
        if self.on_deliver is not None:
            self.on_deliver(pdu)

    def _deliver_run(self, out: list):
        while self.rx_deliv in self.held:
            self._deliver_one(self.rx_deliv, out)

    def _start_timer(self):
        self.rx_reord = self.rx_next
        if self.sim is not None:
            self._timer = self.sim.schedule(self.t_reordering, self.t_reordering_expire)
        else:
            self._timer = True

    def _stop_timer(self):
        if self.sim is not None and self._timer is not True:
            self.sim.cancel(self._timer)
        self._timer = None
        self.rx_reord = None

    def resolve_counts(self, sns) -> set[int]:
        """Undelivered COUNTs among ``sns`` plus everything held."""
        out = set(self.held)
        for sn in sns:
            c = self.count_of(sn)
            if c >= self.rx_deliv:
                out.add(c)
        return out
