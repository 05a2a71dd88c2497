"""Traffic Flow Control loop run by the CU once per control epoch."""

from __future__ import annotations

import logging
from collections import Counter, deque
from typing import Callable

from ..engine import Simulator
from .directives import Directive, NoChange, apply_directives, target_mode
from .measurement import NetworkView, crrm_update, drrm_measure
from .policies import Policy, PolicyContext, RlPolicy
from .qoe import DEFAULT_QOE_WEIGHTS, FlowEpochStats

log = logging.getLogger(__name__)


class TrafficFlowControl:
    """Per-epoch measurement, aggregation, decision and reconfiguration.

    At each boundary every leg's dRRM window is closed. Reports (and the
    per-flow QoE statistics collected alongside) reach the cRRM
    ``measurement_delay`` epochs later. The policy then decides on the
    current view and valid directives take effect at this boundary, i.e. for
    the epoch that starts now.
    """

    def __init__(self, sim: Simulator, legs: dict, dataplane, flows: dict, candidates: dict,
                 policy: Policy, epoch: int, alpha: float = 0.3, measurement_delay: int = 1,
                 collect_flow_stats: Callable[[tuple[int, int]], list[FlowEpochStats]] | None = None,
                 qoe_weights=DEFAULT_QOE_WEIGHTS):
        if epoch <= 0:
            raise ValueError("epoch must be positive")
        if measurement_delay < 0:
            raise ValueError("measurement_delay must be >= 0")
        self.sim = sim
        self.legs = legs
        self.dp = dataplane
        self.flows = flows
        self.candidates = candidates
        self.policy = policy
        self.epoch = epoch
        self.alpha = alpha
        self.measurement_delay = measurement_delay
        self.collect_flow_stats = collect_flow_stats
        self.qoe_weights = qoe_weights
        self.view = NetworkView.initial(legs.values())
        self.k = 0
        self._pipeline: deque = deque()
        self._rng = sim.rng("policy")
        self.decisions: dict[str, Counter] = {f: Counter() for f in flows}
        self.directive_log: list[tuple[int, Directive]] = []
        self.rejected: list[tuple[int, Directive, str]] = []
        self.policy_failures = 0

    def _context(self, stats) -> PolicyContext:
        return PolicyContext(
            now=self.sim.now, epoch=self.k, epoch_ns=self.epoch, view=self.view, flows=self.flows,
            modes={f: self.dp.mode_of(f) for f in self.flows}, candidates=self.candidates,
            flow_stats=stats, rng=self._rng, qoe_weights=self.qoe_weights,
        )

    def start(self):
        self.policy.begin_run(self._context([]))
        self.sim.schedule(self.epoch, self._tick)

    def _tick(self):
        self.k += 1
        now = self.sim.now
        window = (now - self.epoch, now)
        reports = [drrm_measure(leg, window) for leg in self.legs.values()]
        stats = self.collect_flow_stats(window) if self.collect_flow_stats else []
        self._pipeline.append((self.k + self.measurement_delay, reports, stats))
        arrived_reports, arrived_stats = [], []
        while self._pipeline and self._pipeline[0][0] <= self.k:
            _, r, s = self._pipeline.popleft()
            arrived_reports.append(r)
            arrived_stats.extend(s)
        if arrived_reports:
            for batch in arrived_reports:
                self.view = crrm_update(self.view, batch, self.alpha, now)
        else:
            self.view = crrm_update(self.view, [], self.alpha, now)

        ctx = self._context(arrived_stats)
        try:
            directives = list(self.policy.decide(ctx))
        except Exception:
            log.exception("policy %s failed at epoch %d; no change this epoch", self.policy.name, self.k)
            self.policy_failures += 1
            directives = []
        scheduled, rejected = apply_directives(directives, self.dp, self.sim)
        for d in directives:
            if not isinstance(d.action, NoChange):
                self.directive_log.append((now, d))
        for d, reason in rejected:
            self.rejected.append((now, d, reason))
        self._record(ctx, directives, rejected)
        self.sim.schedule(self.epoch, self._tick)

    def _record(self, ctx, directives, rejected):
        bad = {id(d) for d, _ in rejected}
        chosen = {}
        for d in directives:
            if id(d) in bad or isinstance(d.action, NoChange) or d.flow_id not in self.flows:
                continue
            chosen[d.flow_id] = target_mode(d.action).label()
        for flow_id in self.flows:
            if isinstance(self.policy, RlPolicy):
                a = self.policy.selected(flow_id, self.k)
                if a is not None:
                    self.decisions[flow_id][self.policy.action_label(flow_id, a)] += 1
                    continue
            label = chosen.get(flow_id) or ctx.modes[flow_id].label()
            self.decisions[flow_id][label] += 1
