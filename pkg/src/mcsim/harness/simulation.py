"""End-to-end wiring: traffic -> SDAP -> PDCP -> legs -> PDCP rx, plus TFC."""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field

from ..control.policies import Policy, make_policy
from ..control.qlearning import BUCKET_SCHEME, load_checkpoint
from ..control.qoe import FlowEpochStats, nearest_rank
from ..control.tfc import TrafficFlowControl
from ..engine import NS_PER_S, Simulator
from ..netmodel import Leg, next_arrival
from ..stack.bearer import BearerMode, Single
from ..stack.pdcp import PdcpPdu, PdcpRx, PdcpTx
from ..stack.sdap import Sdap
from .metrics import FlowMetrics, LegMetrics, MetricsReport, RunMeta
from .scenario import FlowConfig, Scenario

log = logging.getLogger(__name__)


@dataclass
class _Epoch:
    delivered_bits: int = 0
    delivered_sdus: int = 0
    sdus_sent: int = 0
    copies_sent: int = 0
    latencies: list = field(default_factory=list)


class FlowRuntime:
    """One QoS flow on its own radio bearer (a PDCP tx/rx pair)."""

    def __init__(self, sim: Simulator, cfg: FlowConfig, mode: BearerMode, t_reordering: int,
                 discard_timer: int | None):
        self.cfg = cfg
        self.flow_id = cfg.qos.flow_id
        self.tx = PdcpTx(mode, discard_timer)
        self.rx = PdcpRx(sim, t_reordering, self._on_deliver)
        self.rng = sim.rng(f"traffic:{self.flow_id}")
        self.sim = sim
        self.cbr_gap = next_arrival(cfg.traffic, self.rng)[0] if cfg.traffic.kind == "cbr" else None
        self.offered_sdus = 0
        self.offered_bytes = 0
        self.delivered_bytes = 0
        self.copies_sent = 0
        self.switches = 0
        self.latencies: list[int] = []
        self.epoch = _Epoch()
        self._skipped_mark = 0

    def _on_deliver(self, pdu: PdcpPdu):
        lat = self.sim.now - pdu.born_at
        self.latencies.append(lat)
        self.delivered_bytes += pdu.payload_bytes
        e = self.epoch
        e.delivered_bits += pdu.payload_bytes * 8
        e.delivered_sdus += 1
        e.latencies.append(lat)

    def epoch_stats(self, window) -> FlowEpochStats:
        e = self.epoch
        self.epoch = _Epoch()
        lost = self.rx.skipped - self._skipped_mark
        self._skipped_mark = self.rx.skipped
        return FlowEpochStats(self.flow_id, window, e.delivered_bits, e.delivered_sdus, lost,
                              e.sdus_sent, e.copies_sent, e.latencies)


class Simulation:
    """A wired, runnable instance of a scenario; also the control data plane."""

    def __init__(self, scenario: Scenario, seed: int, policy: Policy | str | None = None,
                 trace=None, checkpoint: str | None = None):
        self.scenario = scenario
        self.seed = seed
        self.sim = Simulator(seed, trace)
        sim = self.sim
        self.legs: dict[str, Leg] = {}
        for lc in scenario.legs:
            self.legs[lc.leg_id] = Leg(
                sim, lc.leg_id, lc.rat, lc.capacity_bps, lc.distance_m, lc.prop_delay,
                copy.copy(lc.channel), lc.queue_cap, on_arrival=self._on_leg_arrival,
            )
        t_reord = scenario.effective_t_reordering()
        sdap = Sdap({f.qos.flow_id: f.bearer for f in scenario.flows}, scenario.default_bearer)
        self.flows: dict[str, FlowRuntime] = {}
        for fc in scenario.flows:
            mode = scenario.bearers[sdap.map(fc.qos.flow_id)]
            self.flows[fc.qos.flow_id] = FlowRuntime(sim, fc, mode, t_reord, scenario.discard_timer)

        self.policy = self._make_policy(policy, checkpoint)
        self.tfc = TrafficFlowControl(
            sim, self.legs, self, {f: r.cfg.qos for f, r in self.flows.items()},
            {f: r.cfg.candidate_legs for f, r in self.flows.items()}, self.policy, scenario.epoch,
            scenario.ewma_alpha, scenario.measurement_delay, self._collect, scenario.qoe_weights,
        )
        self._started = False

    def _make_policy(self, policy, checkpoint) -> Policy:
        if isinstance(policy, Policy):
            return policy
        name = policy or self.scenario.policy
        params = dict(self.scenario.policy_params) if name == self.scenario.policy else {}
        if name == "rl" and checkpoint:
            params.update(train=False, epsilon=0.0, qtable=load_checkpoint(checkpoint, BUCKET_SCHEME))
            params.pop("checkpoint", None)
        return make_policy(name, params)

    # data plane protocol
    def has_flow(self, flow_id):
        return flow_id in self.flows

    def has_leg(self, leg_id):
        return leg_id in self.legs

    def leg_up(self, leg_id):
        return self.legs[leg_id].up

    def mode_of(self, flow_id):
        return self.flows[flow_id].tx.mode

    def switch(self, flow_id, to_leg) -> int:
        f = self.flows[flow_id]
        old = f.tx.mode
        if isinstance(old, Single) and old.leg == to_leg:
            return 0
        out = f.tx.fast_switch(old.legs, to_leg, self.sim.now)
        f.switches += 1
        log.debug("t=%d flow %s: %s -> single:%s, %d re-sent", self.sim.now, flow_id, old.label(), to_leg, len(out))
        for leg, pdu in out:
            self._send(f, leg, pdu)
        return len(out)

    def set_mode(self, flow_id, mode):
        f = self.flows[flow_id]
        if f.tx.mode == mode:
            return
        f.tx.set_mode(mode)
        f.switches += 1

    # traffic and delivery
    def _send(self, f: FlowRuntime, leg_id: str, pdu: PdcpPdu):
        f.copies_sent += 1
        f.epoch.copies_sent += 1
        self.legs[leg_id].transmit(pdu)

    def _emit(self, f: FlowRuntime):
        gen = f.cfg.traffic
        now = self.sim.now
        if gen.stop is not None and now >= gen.stop:
            return
        size = gen.size_bytes
        f.offered_sdus += 1
        f.offered_bytes += size
        f.epoch.sdus_sent += 1
        for leg, pdu in f.tx.transmit(f.flow_id, size, now):
            self._send(f, leg, pdu)
        gap = f.cbr_gap if f.cbr_gap is not None else next_arrival(gen, f.rng)[0]
        self.sim.schedule(gap, self._emit, f)

    def _on_leg_arrival(self, leg: Leg, pdu: PdcpPdu):
        f = self.flows[pdu.flow_id]
        f.rx.receive(pdu)
        if self.scenario.ack_feedback:
            delay = self.scenario.ack_delay if self.scenario.ack_delay is not None else leg.prop_ns
            self.sim.schedule(delay, f.tx.ack, pdu.sn)

    def _collect(self, window):
        return [f.epoch_stats(window) for f in self.flows.values()]

    def start(self):
        if self._started:
            return
        self._started = True
        sim = self.sim
        for fault in self.scenario.faults:
            leg = self.legs[fault.leg_id]
            sim.schedule_at(fault.down_at, leg.set_down)
            if fault.up_at is not None:
                sim.schedule_at(fault.up_at, leg.set_up)
        for f in self.flows.values():
            sim.schedule_at(f.cfg.traffic.start, self._emit, f)
        self.tfc.start()

    def run(self, until: int | None = None) -> MetricsReport:
        self.start()
        end = self.scenario.sim_duration if until is None else until
        self.sim.run_until(end)
        return self.report()

    # accounting
    def in_flight(self) -> dict[str, int]:
        """Per flow, undelivered COUNTs that still have a copy on a leg or in the reorder buffer."""
        pending: dict[str, list[int]] = {fid: [] for fid in self.flows}
        for leg in self.legs.values():
            for pdu in leg.in_flight():
                pending[pdu.flow_id].append(pdu.sn)
        return {fid: len(self.flows[fid].rx.resolve_counts(sns)) for fid, sns in pending.items()}

    def report(self) -> MetricsReport:
        end = self.sim.now
        in_flight = self.in_flight()
        flows = []
        for fid, f in self.flows.items():
            rx = f.rx
            offered = f.offered_sdus
            delivered = rx.delivered
            pend = in_flight[fid]
            lost = offered - delivered - pend
            gen = f.cfg.traffic
            active_end = end if gen.stop is None else min(gen.stop, end)
            active = max(0, active_end - gen.start)
            lat = sorted(f.latencies)
            flows.append(FlowMetrics(
                flow_id=fid,
                offered_sdus=offered,
                offered_bytes=f.offered_bytes,
                delivered_sdus=delivered,
                delivered_bytes=f.delivered_bytes,
                goodput_bps=f.delivered_bytes * 8 * NS_PER_S / active if active else 0.0,
                latency_p50_ns=nearest_rank(lat, 50),
                latency_p95_ns=nearest_rank(lat, 95),
                latency_p99_ns=nearest_rank(lat, 99),
                loss_fraction=lost / offered if offered else 0.0,
                lost_sdus=lost,
                reorder_skipped=rx.skipped,
                in_flight_sdus=pend,
                switch_count=f.switches,
                duplicate_discards=rx.duplicate_discards,
                late_discards=rx.late_discards,
                reordering_timeouts=rx.reordering_timeouts,
                retransmissions=f.tx.retransmissions,
                copies_sent=f.copies_sent,
                final_mode=f.tx.mode.label(),
                decisions=dict(sorted(self.tfc.decisions[fid].items())),
            ))
        legs = []
        for lid, leg in self.legs.items():
            c = leg.counters
            legs.append(LegMetrics(
                leg_id=lid,
                rat=leg.rat.value,
                utilization=min(1.0, leg.busy_within(end) / end) if end else 0.0,
                packets_in=c.packets_in,
                delivered=c.delivered,
                drops_channel=c.lost_channel,
                drops_linkdown=c.dropped_linkdown,
                drops_overflow=c.dropped_overflow,
                prop_delay_ns=leg.prop_ns,
            ))
        meta = RunMeta(
            scenario=self.scenario.name,
            scenario_hash=self.scenario.hash(),
            seed=self.seed,
            policy=self.policy.name,
            sim_duration_ns=end,
            epoch_ns=self.scenario.epoch,
            events_processed=self.sim.processed,
            directives_applied=len(self.tfc.directive_log),
            directives_rejected=len(self.tfc.rejected),
            policy_failures=self.tfc.policy_failures,
        )
        return MetricsReport(meta, flows, legs)


def run_simulation(scenario: Scenario, seed: int | None = None, policy=None, until: int | None = None,
                   trace=None, checkpoint: str | None = None) -> MetricsReport:
    """Run ``scenario`` once; identical (scenario, seed) give identical reports."""
    seed = scenario.master_seed if seed is None else seed
    return Simulation(scenario, seed, policy, trace, checkpoint).run(until)
