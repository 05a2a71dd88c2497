"""Traffic Flow Control policies.

Each policy looks at the cRRM view once per control epoch and returns
directives. New decision families plug in by subclassing ``Policy`` and
registering a name in ``POLICIES``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from ..stack.bearer import BearerMode, Duplicate, Single, Split
from ..stack.sdap import QosFlow
from .directives import Directive, SetDuplicate, SetSplit, Switch
from .madm import BENEFIT, COST, saw_scores, topsis_closeness
from .measurement import LegView, NetworkView
from .qlearning import BUCKET_SCHEME, QTable, load_checkpoint, q_select, q_update
from .qoe import DEFAULT_QOE_WEIGHTS, FlowEpochStats, epoch_qoe

log = logging.getLogger(__name__)

_FLOOR = 1e-9


@dataclass
class PolicyContext:
    now: int
    epoch: int
    epoch_ns: int
    view: NetworkView
    flows: dict[str, QosFlow]
    modes: dict[str, BearerMode]
    candidates: dict[str, tuple[str, ...]]
    flow_stats: list[FlowEpochStats] = field(default_factory=list)
    rng: object = None
    qoe_weights: tuple = DEFAULT_QOE_WEIGHTS


class Policy:
    name = "base"

    def begin_run(self, ctx: PolicyContext) -> None:
        pass

    def decide(self, ctx: PolicyContext) -> list[Directive]:
        raise NotImplementedError


class StaticPolicy(Policy):
    """Never reconfigures; bearers keep their initial mode."""

    name = "static"

    def decide(self, ctx):
        return []


def _up_candidates(ctx: PolicyContext, flow_id: str) -> list[tuple[str, LegView]]:
    return [(leg, ctx.view.legs[leg]) for leg in ctx.candidates[flow_id] if ctx.view.legs[leg].admin_up]


def _best_by_avail(alts):
    best = None
    for leg, lv in alts:
        if best is None or lv.ewma_avail_bps > best[1].ewma_avail_bps:
            best = (leg, lv)
    return best


class ThresholdPolicy(Policy):
    """Threshold-activated handover with hysteresis.

    The serving leg's quality is its smoothed delivered throughput over the
    flow target. A switch fires after ``hysteresis_epochs`` consecutive
    epochs below ``theta_low`` if another leg's available rate exceeds
    ``theta_high`` of the target. A serving leg reported down triggers an
    immediate switch. After a switch the policy waits ``hold_epochs`` before
    evaluating quality again.
    """

    name = "threshold"

    def __init__(self, theta_low: float = 0.5, theta_high: float = 0.8, hysteresis_epochs: int = 3,
                 hold_epochs: int = 5):
        if not theta_low < theta_high:
            raise ValueError("theta_low must be below theta_high")
        if hysteresis_epochs < 1:
            raise ValueError("hysteresis_epochs must be >= 1")
        self.theta_low = theta_low
        self.theta_high = theta_high
        self.hysteresis_epochs = hysteresis_epochs
        self.hold_epochs = hold_epochs
        self._below: dict[str, int] = {}
        self._hold: dict[str, int] = {}

    def begin_run(self, ctx):
        self._below.clear()
        self._hold.clear()

    def decide(self, ctx):
        out = []
        for flow_id, flow in ctx.flows.items():
            d = self.decide_flow(ctx, flow_id, flow)
            if d is not None:
                out.append(d)
        return out

    def decide_flow(self, ctx, flow_id, flow) -> Directive | None:
        mode = ctx.modes[flow_id]
        if not isinstance(mode, Single):
            return None
        serving = ctx.view.legs[mode.leg]
        others = [(leg, lv) for leg, lv in _up_candidates(ctx, flow_id) if leg != mode.leg]
        best = _best_by_avail(others)
        if not serving.admin_up:
            if best is None:
                return None
            return self._switch(flow_id, best[0])
        if self._hold.get(flow_id, 0) > 0:
            self._hold[flow_id] -= 1
            return None
        quality = serving.ewma_thr_bps / flow.target_thr_bps
        if quality < self.theta_low:
            self._below[flow_id] = self._below.get(flow_id, 0) + 1
        else:
            self._below[flow_id] = 0
        if (self._below[flow_id] >= self.hysteresis_epochs and best is not None
                and best[1].ewma_avail_bps / flow.target_thr_bps > self.theta_high):
            return self._switch(flow_id, best[0])
        return None

    def _switch(self, flow_id, leg):
        self._below[flow_id] = 0
        self._hold[flow_id] = self.hold_epochs
        return Directive(flow_id, Switch(leg))


def _satisfaction(lv: LegView, flow: QosFlow) -> tuple[float, float, float]:
    thr = min(1.0, lv.ewma_avail_bps / flow.target_thr_bps)
    delay = 1.0 if lv.ewma_delay <= 0 else min(1.0, flow.latency_budget / lv.ewma_delay)
    if lv.ewma_loss <= flow.reliability_target:
        rel = 1.0
    else:
        rel = flow.reliability_target / lv.ewma_loss
    return thr, delay, rel


class _RankingPolicy(Policy):
    """Shared switch/duplicate/split logic over per-leg scores."""

    def __init__(self, mode: str = "switch", margin: float = 0.05):
        if mode not in ("switch", "duplicate", "split"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.margin = margin

    def scores(self, ctx, flow, alts) -> list[float]:
        raise NotImplementedError

    def decide(self, ctx):
        out = []
        for flow_id, flow in ctx.flows.items():
            alts = _up_candidates(ctx, flow_id)
            if not alts:
                continue
            scores = self.scores(ctx, flow, alts)
            order = sorted(range(len(alts)), key=lambda i: (-scores[i], i))
            legs = [alts[i][0] for i in order]
            current = ctx.modes[flow_id]
            if self.mode == "duplicate" and len(legs) >= 2:
                want = tuple(legs[:2])
                if not (isinstance(current, Duplicate) and set(current.leg_set) == set(want)):
                    out.append(Directive(flow_id, SetDuplicate(want)))
                continue
            if self.mode == "split" and len(legs) >= 2:
                top = max(scores)
                weights = {alts[i][0]: max(1, round(10 * scores[i] / top)) for i in range(len(alts))}
                if not (isinstance(current, Split) and current.weight_map() == weights):
                    out.append(Directive(flow_id, SetSplit(weights)))
                continue
            best = legs[0]
            if isinstance(current, Single):
                if current.leg == best:
                    continue
                serving = dict(zip([a[0] for a in alts], scores)).get(current.leg)
                if serving is not None and scores[order[0]] <= serving + self.margin:
                    continue
            out.append(Directive(flow_id, Switch(best)))
        return out


class UtilityPolicy(_RankingPolicy):
    """Weighted sum of per-criterion satisfaction (throughput, delay, loss)."""

    name = "utility"

    def __init__(self, weights=DEFAULT_QOE_WEIGHTS, mode: str = "switch", margin: float = 0.05):
        super().__init__(mode, margin)
        self.weights = tuple(weights)

    def scores(self, ctx, flow, alts):
        w = self.weights
        return [sum(wi * si for wi, si in zip(w, _satisfaction(lv, flow))) for _, lv in alts]


class MadmPolicy(_RankingPolicy):
    """SAW or TOPSIS over (available rate, delay, delivery ratio)."""

    KINDS = (BENEFIT, COST, BENEFIT)

    def __init__(self, method: str = "saw", weights=(0.4, 0.3, 0.3), mode: str = "switch",
                 margin: float = 0.05):
        super().__init__(mode, margin)
        if method not in ("saw", "topsis"):
            raise ValueError(f"unknown MADM method {method!r}")
        self.method = method
        self.name = method
        self.weights = tuple(weights)

    def scores(self, ctx, flow, alts):
        matrix = [[max(lv.ewma_avail_bps, _FLOOR), max(lv.ewma_delay, _FLOOR), max(1 - lv.ewma_loss, _FLOOR)]
                  for _, lv in alts]
        fn = saw_scores if self.method == "saw" else topsis_closeness
        return [float(x) for x in fn(matrix, self.weights, self.KINDS)]


MAX_RL_LEGS = 2


def thr_bucket(thr_bps: float, target_bps: float) -> int:
    if thr_bps <= 0:
        return 0
    if thr_bps <= 0.5 * target_bps:
        return 1
    if thr_bps <= target_bps:
        return 2
    return 3


def rl_state(view: NetworkView, legs, target_bps: float) -> str:
    parts = []
    for leg in legs:
        lv = view.legs[leg]
        parts.append(f"{thr_bucket(lv.ewma_thr_bps, target_bps)}{'U' if lv.admin_up else 'D'}")
    return "|".join(parts)


def rl_action_labels(legs) -> list[str]:
    labels = [f"single:{leg}" for leg in legs]
    if len(legs) >= 2:
        labels += ["duplicate", "split"]
    return labels


@dataclass
class _Step:
    state: str
    action: int | None = None


class RlPolicy(Policy):
    """Tabular Q-learning over discretized leg views.

    Actions per flow: Single on each candidate leg, Duplicate over all of
    them, Split weighted by available rate. The reward for the action taken
    at epoch boundary j is the window [j, j+1]'s normalized QoE minus
    ``resource_cost`` per redundant copy, clipped to [0, 1]; it is applied
    when that window's statistics reach the controller.
    """

    name = "rl"

    def __init__(self, alpha: float = 0.1, gamma: float = 0.9, epsilon: float = 0.1,
                 epsilon_end: float | None = None, decay_epochs: int = 0, train: bool = True,
                 checkpoint: str | None = None, resource_cost: float = 0.1, qtable: QTable | None = None):
        self.alpha = alpha
        self.gamma = gamma
        self.epsilon = epsilon
        self.epsilon_end = epsilon if epsilon_end is None else epsilon_end
        self.decay_epochs = decay_epochs
        self.train = train
        self.resource_cost = resource_cost
        self.q = qtable
        if self.q is None and checkpoint:
            self.q = load_checkpoint(checkpoint, BUCKET_SCHEME)
        self.total_epochs = 0
        self.updates = 0
        self._history: dict[str, dict[int, _Step]] = {}
        self._pending: dict[str, list[FlowEpochStats]] = {}
        self._legs: dict[str, tuple[str, ...]] = {}

    def current_epsilon(self) -> float:
        if self.decay_epochs <= 0 or self.total_epochs >= self.decay_epochs:
            return self.epsilon_end if self.decay_epochs > 0 else self.epsilon
        frac = self.total_epochs / self.decay_epochs
        return self.epsilon + (self.epsilon_end - self.epsilon) * frac

    def begin_run(self, ctx):
        self._history = {f: {} for f in ctx.flows}
        self._pending = {f: [] for f in ctx.flows}
        self._legs = {f: tuple(ctx.candidates[f][:MAX_RL_LEGS]) for f in ctx.flows}
        sizes = {len(rl_action_labels(legs)) for legs in self._legs.values()}
        if len(sizes) > 1:
            raise ValueError("RL flows must all have the same number of candidate legs")
        n = sizes.pop() if sizes else 1
        if self.q is None:
            self.q = QTable(n, self.alpha, self.gamma, self.epsilon, BUCKET_SCHEME, r_max=1.0)
        elif self.q.n_actions != n:
            raise ValueError(f"Q-table has {self.q.n_actions} actions, scenario needs {n}")

    def reward(self, stats: FlowEpochStats, flow: QosFlow, weights) -> float:
        r = (epoch_qoe(stats, flow, weights) - 1.0) / 4.0 - self.resource_cost * stats.redundancy
        return min(1.0, max(0.0, r))

    def decide(self, ctx):
        eps = self.current_epsilon() if self.train else self.epsilon
        for st in ctx.flow_stats:
            if st.flow_id in self._pending:
                self._pending[st.flow_id].append(st)
        out = []
        for flow_id, flow in ctx.flows.items():
            legs = self._legs[flow_id]
            hist = self._history[flow_id]
            s = rl_state(ctx.view, legs, flow.target_thr_bps)
            hist[ctx.epoch] = _Step(s)
            if self.train:
                self._learn(flow_id, flow, ctx)
            a = q_select(self.q, s, eps, ctx.rng)
            hist[ctx.epoch].action = a
            d = self._directive(ctx, flow_id, legs, a)
            if d is not None:
                out.append(d)
        self.total_epochs += 1
        return out

    def _learn(self, flow_id, flow, ctx):
        hist = self._history[flow_id]
        keep = []
        for st in self._pending[flow_id]:
            j = st.window[0] // ctx.epoch_ns
            step, nxt = hist.get(j), hist.get(j + 1)
            if step is None or step.action is None:
                continue
            if nxt is None:
                keep.append(st)
                continue
            q_update(self.q, step.state, step.action, self.reward(st, flow, ctx.qoe_weights), nxt.state)
            self.updates += 1
        self._pending[flow_id] = keep
        # statistics lag by at most a few epochs; older steps are never looked up
        for j in [j for j in hist if j < ctx.epoch - 16]:
            del hist[j]

    def _directive(self, ctx, flow_id, legs, a) -> Directive | None:
        current = ctx.modes[flow_id]
        n = len(legs)
        if a < n:
            if isinstance(current, Single) and current.leg == legs[a]:
                return None
            return Directive(flow_id, Switch(legs[a]))
        if a == n:
            if isinstance(current, Duplicate) and set(current.leg_set) == set(legs):
                return None
            return Directive(flow_id, SetDuplicate(legs))
        avail = [ctx.view.legs[leg].ewma_avail_bps for leg in legs]
        top = max(avail)
        weights = {leg: (max(1, round(10 * v / top)) if top > 0 else 1) for leg, v in zip(legs, avail)}
        if isinstance(current, Split) and current.weight_map() == weights:
            return None
        return Directive(flow_id, SetSplit(weights))

    def selected(self, flow_id: str, epoch: int) -> int | None:
        """Action index chosen for ``flow_id`` at tick ``epoch``, if recorded."""
        step = self._history.get(flow_id, {}).get(epoch)
        return None if step is None else step.action

    def action_label(self, flow_id: str, a: int) -> str:
        return rl_action_labels(self._legs[flow_id])[a]


POLICIES = {
    "static": StaticPolicy,
    "threshold": ThresholdPolicy,
    "utility": UtilityPolicy,
    "saw": lambda **kw: MadmPolicy(method="saw", **kw),
    "topsis": lambda **kw: MadmPolicy(method="topsis", **kw),
    "rl": RlPolicy,
}


def make_policy(name: str, params: dict | None = None) -> Policy:
    try:
        factory = POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}") from None
    params = dict(params or {})
    for key in ("weights",):
        if key in params and isinstance(params[key], list):
            params[key] = tuple(params[key])
    return factory(**params)
