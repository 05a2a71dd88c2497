"""QoS flows and the SDAP flow-to-bearer table."""

from __future__ import annotations

from dataclasses import dataclass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class QosFlow:
    flow_id: str
    target_thr_bps: float
    latency_budget: int
    reliability_target: float = 0.0

    def __post_init__(self):
        if self.target_thr_bps <= 0:
            raise ValueError(f"flow {self.flow_id}: target_thr_bps must be > 0")
        if self.latency_budget <= 0:
            raise ValueError(f"flow {self.flow_id}: latency_budget must be > 0")
        if not 0.0 <= self.reliability_target <= 1.0:
            raise ValueError(f"flow {self.flow_id}: reliability_target outside [0, 1]")


class Sdap:
    """Maps QoS flows onto bearer ids, with an optional default bearer."""

    def __init__(self, mapping: dict[str, str], default: str | None = None):
        self.mapping = dict(mapping)
        self.default = default

    def map(self, flow_id: str) -> str:
        bearer = self.mapping.get(flow_id, self.default)
        if bearer is None:
            raise ConfigError(f"flow {flow_id!r} has no bearer and no default bearer is configured")
        return bearer


def sdap_map(flow: QosFlow, sdap: Sdap) -> str:
    return sdap.map(flow.flow_id)
