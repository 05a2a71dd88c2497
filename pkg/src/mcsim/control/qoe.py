"""Per-flow epoch statistics and the MOS-style QoE score."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..engine import NS_PER_S
from ..stack.sdap import QosFlow

DEFAULT_QOE_WEIGHTS = (0.5, 0.25, 0.25)


def nearest_rank(sorted_values, pct: float):
    """Nearest-rank percentile of an already sorted sequence (None if empty)."""
    n = len(sorted_values)
    if n == 0:
        return None
    rank = max(1, math.ceil(pct / 100.0 * n))
    return sorted_values[rank - 1]


@dataclass
class FlowEpochStats:
    flow_id: str
    window: tuple[int, int]
    delivered_bits: int = 0
    delivered_sdus: int = 0
    lost_sdus: int = 0
    sdus_sent: int = 0
    copies_sent: int = 0
    latencies: list[int] = field(default_factory=list)

    @property
    def throughput_bps(self) -> float:
        return self.delivered_bits * NS_PER_S / (self.window[1] - self.window[0])

    @property
    def p95_latency(self) -> int | None:
        return nearest_rank(sorted(self.latencies), 95)

    @property
    def loss(self) -> float | None:
        n = self.delivered_sdus + self.lost_sdus
        return self.lost_sdus / n if n else None

    @property
    def redundancy(self) -> float:
        """Copies per SDU put on the air beyond the first."""
        return self.copies_sent / self.sdus_sent - 1.0 if self.sdus_sent else 0.0


def qoe_score(achieved_thr: float, p95_latency, loss, flow: QosFlow, weights=DEFAULT_QOE_WEIGHTS) -> float:
    """Score in [1, 5]; undefined latency or loss counts as unsatisfied."""
    w_t, w_l, w_r = weights
    if min(weights) < 0 or abs(w_t + w_l + w_r - 1.0) > 1e-9:
        raise ValueError(f"QoE weights {weights} must be non-negative and sum to 1")
    sat_t = min(1.0, achieved_thr / flow.target_thr_bps)
    if p95_latency is None:
        sat_l = 0.0
    elif p95_latency <= 0:
        sat_l = 1.0
    else:
        sat_l = min(1.0, flow.latency_budget / p95_latency)
    if loss is None:
        sat_r = 0.0
    elif loss <= flow.reliability_target:
        sat_r = 1.0
    else:
        sat_r = flow.reliability_target / loss
    return 1.0 + 4.0 * (w_t * sat_t + w_l * sat_l + w_r * sat_r)


def epoch_qoe(stats: FlowEpochStats, flow: QosFlow, weights=DEFAULT_QOE_WEIGHTS) -> float:
    return qoe_score(stats.throughput_bps, stats.p95_latency, stats.loss, flow, weights)
