"""dRRM per-leg measurement windows and the cRRM aggregated view."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..engine import NS_PER_S
from ..netmodel import Leg, LegWindow


@dataclass(frozen=True)
class MeasurementReport:
    leg_id: str
    window: tuple[int, int]
    delivered_bits: int
    offered_bits: int
    lost_pdus: int
    delivered_pdus: int
    mean_queue_depth: float
    admin_up: bool
    mean_delay: float | None = None
    capacity_bps: float = 0.0
    channel_loss: float = 0.0
    down_during_window: bool = False

    def __post_init__(self):
        start, end = self.window
        if end <= start:
            raise ValueError(f"report window {self.window} is empty")
        if min(self.delivered_bits, self.offered_bits, self.lost_pdus, self.delivered_pdus) < 0:
            raise ValueError("negative counter in report")
        if self.delivered_bits > self.offered_bits:
            raise ValueError("delivered_bits exceeds offered_bits")

    @property
    def duration_s(self) -> float:
        return (self.window[1] - self.window[0]) / NS_PER_S

    @property
    def throughput_bps(self) -> float:
        return self.delivered_bits / self.duration_s

    @property
    def loss_sample(self) -> float:
        n = self.delivered_pdus + self.lost_pdus
        if n == 0:
            return self.channel_loss if self.admin_up else 1.0
        return self.lost_pdus / n

    @property
    def available_bps(self) -> float:
        if not self.admin_up:
            return 0.0
        return self.capacity_bps * (1.0 - self.channel_loss)


def drrm_measure(leg: Leg, window: tuple[int, int]) -> MeasurementReport:
    """Snapshot the leg's window counters and reset them."""
    w = leg.window
    leg.window = LegWindow(down_seen=not leg.up)
    return MeasurementReport(
        leg_id=leg.leg_id,
        window=window,
        delivered_bits=w.delivered_bits,
        offered_bits=w.offered_bits,
        lost_pdus=w.lost_pdus,
        delivered_pdus=w.delivered_pdus,
        mean_queue_depth=w.depth_sum / w.depth_samples if w.depth_samples else 0.0,
        admin_up=leg.up,
        mean_delay=w.delay_sum / w.delivered_pdus if w.delivered_pdus else None,
        capacity_bps=leg.capacity_bps,
        channel_loss=leg.channel.loss_probability,
        down_during_window=w.down_seen or not leg.up,
    )


@dataclass(frozen=True)
class LegView:
    ewma_thr_bps: float = 0.0
    ewma_loss: float = 0.0
    ewma_delay: float = 0.0
    ewma_avail_bps: float = 0.0
    admin_up: bool = True
    staleness: int = 0
    capacity_bps: float = 0.0
    reported: bool = False


@dataclass(frozen=True)
class NetworkView:
    legs: dict[str, LegView] = field(default_factory=dict)
    timestamp: int = 0

    @classmethod
    def initial(cls, legs) -> "NetworkView":
        """Prior built from configuration: propagation delay and radio loss."""
        views = {}
        for leg in legs:
            views[leg.leg_id] = LegView(
                ewma_loss=leg.channel.loss_probability,
                ewma_delay=float(leg.prop_ns),
                ewma_avail_bps=leg.capacity_bps * (1 - leg.channel.loss_probability) if leg.up else 0.0,
                admin_up=leg.up,
                capacity_bps=leg.capacity_bps,
            )
        return cls(views, 0)


def _ewma(prev: float, sample: float, alpha: float) -> float:
    return alpha * sample + (1 - alpha) * prev


def crrm_update(view: NetworkView, reports, alpha: float, now: int | None = None) -> NetworkView:
    """Fold one epoch of reports into the view.

    Legs without a report this epoch keep their averages and age by one
    epoch. Reports for legs the view does not know yet are taken as-is.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha={alpha} outside (0, 1]")
    by_leg = {r.leg_id: r for r in reports}
    legs = {}
    for leg_id, lv in view.legs.items():
        r = by_leg.pop(leg_id, None)
        if r is None:
            legs[leg_id] = replace(lv, staleness=lv.staleness + 1)
            continue
        delay = lv.ewma_delay if r.mean_delay is None else _ewma(lv.ewma_delay, r.mean_delay, alpha)
        legs[leg_id] = LegView(
            ewma_thr_bps=_ewma(lv.ewma_thr_bps, r.throughput_bps, alpha),
            ewma_loss=min(1.0, max(0.0, _ewma(lv.ewma_loss, r.loss_sample, alpha))),
            ewma_delay=delay,
            ewma_avail_bps=_ewma(lv.ewma_avail_bps, r.available_bps, alpha),
            admin_up=r.admin_up,
            staleness=0,
            capacity_bps=r.capacity_bps or lv.capacity_bps,
            reported=True,
        )
    for leg_id, r in by_leg.items():
        legs[leg_id] = LegView(
            ewma_thr_bps=r.throughput_bps,
            ewma_loss=r.loss_sample,
            ewma_delay=r.mean_delay if r.mean_delay is not None else 0.0,
            ewma_avail_bps=r.available_bps,
            admin_up=r.admin_up,
            capacity_bps=r.capacity_bps,
            reported=True,
        )
    ts = now if now is not None else max((r.window[1] for r in reports), default=view.timestamp)
    return NetworkView(legs, ts)
