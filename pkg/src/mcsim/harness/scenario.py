"""Scenario files: YAML in, validated ``Scenario`` out.

Durations are strings with a unit (``"100ms"``, ``"2.5 s"``, ``"10us"``,
``"1ns"``) or bare numbers meaning seconds. Rates are strings such as
``"10Mbps"`` (also ``kbps``, ``Gbps``, ``bps``, ``Mbit/s``) or bare numbers in
bit/s. See ``scenarios/annotated.yaml`` for every field.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import yaml

from ..engine import NS_PER_MS, NS_PER_S, NS_PER_US, round_ns
from ..netmodel import SPEED_OF_LIGHT, FlowGen, GeChannel, RatKind
from ..stack.bearer import BearerMode, Duplicate, Single, Split, mode_to_dict
from ..stack.sdap import QosFlow


class ScenarioError(ValueError):
    """Invalid scenario; ``location`` names the offending field."""

    def __init__(self, location: str, message: str):
        self.location = location
        self.message = message
        super().__init__(f"{location}: {message}" if location else message)


class MissingFieldError(ScenarioError):
    pass


class DuplicateIdError(ScenarioError):
    pass


class DanglingReferenceError(ScenarioError):
    pass


class NonPositiveDurationError(ScenarioError):
    pass


_UNITS = {"ns": 1, "us": NS_PER_US, "µs": NS_PER_US, "ms": NS_PER_MS, "s": NS_PER_S, "min": 60 * NS_PER_S}
_RATE_UNITS = {"bps": 1, "kbps": 10**3, "mbps": 10**6, "gbps": 10**9,
               "bit/s": 1, "kbit/s": 10**3, "mbit/s": 10**6, "gbit/s": 10**9}
_NUM = r"([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)"


def parse_duration(value, location: str = "") -> int:
    """Duration to integer nanoseconds."""
    if isinstance(value, bool):
        raise ScenarioError(location, f"expected a duration, got {value!r}")
    if isinstance(value, (int, float)):
        return round_ns(Fraction(value) * NS_PER_S)
    if isinstance(value, str):
        m = re.fullmatch(_NUM + r"\s*(ns|us|µs|ms|s|min)", value.strip())
        if m:
            return round_ns(Fraction(m.group(1)) * _UNITS[m.group(2)])
    raise ScenarioError(location, f"cannot parse duration {value!r} (use e.g. '100ms', '2s')")


def parse_rate(value, location: str = "") -> float:
    if isinstance(value, bool):
        raise ScenarioError(location, f"expected a rate, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = re.fullmatch(_NUM + r"\s*([a-zA-Z/]+)", value.strip())
        if m and m.group(2).lower() in _RATE_UNITS:
            return float(Fraction(m.group(1)) * _RATE_UNITS[m.group(2).lower()])
    raise ScenarioError(location, f"cannot parse rate {value!r} (use e.g. '10Mbps')")


@dataclass
class LegConfig:
    leg_id: str
    rat: RatKind
    capacity_bps: float
    distance_m: float = 0.0
    prop_delay: int | None = None
    queue_cap: int = 1000
    channel: GeChannel = field(default_factory=GeChannel)


@dataclass
class FlowConfig:
    qos: QosFlow
    traffic: FlowGen
    bearer: str
    candidate_legs: tuple[str, ...]


@dataclass
class Fault:
    leg_id: str
    down_at: int
    up_at: int | None = None


@dataclass
class Scenario:
    name: str
    legs: list[LegConfig]
    bearers: dict[str, BearerMode]
    flows: list[FlowConfig]
    sim_duration: int
    epoch: int = 100 * NS_PER_MS
    master_seed: int = 0
    policy: str = "static"
    policy_params: dict = field(default_factory=dict)
    default_bearer: str | None = None
    faults: list[Fault] = field(default_factory=list)
    t_reordering: int | None = None
    ack_feedback: bool = True
    ack_delay: int | None = None
    discard_timer: int | None = 2 * NS_PER_S
    measurement_delay: int = 1
    ewma_alpha: float = 0.3
    qoe_weights: tuple[float, float, float] = (0.5, 0.25, 0.25)

    def leg(self, leg_id: str) -> LegConfig:
        return next(l for l in self.legs if l.leg_id == leg_id)

    def to_dict(self) -> dict:
        """Canonical, defaults-filled form (durations in ns)."""
        return {
            "name": self.name,
            "sim_duration": self.sim_duration,
            "epoch": self.epoch,
            "master_seed": self.master_seed,
            "policy": {"name": self.policy, "params": self.policy_params},
            "default_bearer": self.default_bearer,
            "t_reordering": self.t_reordering,
            "ack_feedback": self.ack_feedback,
            "ack_delay": self.ack_delay,
            "discard_timer": self.discard_timer,
            "measurement_delay": self.measurement_delay,
            "ewma_alpha": self.ewma_alpha,
            "qoe_weights": list(self.qoe_weights),
            "legs": [
                {
                    "id": l.leg_id, "rat": l.rat.value, "capacity_bps": l.capacity_bps,
                    "distance_m": l.distance_m, "prop_delay": l.prop_delay, "queue_cap": l.queue_cap,
                    "channel": {"p_gb": l.channel.p_gb, "p_bg": l.channel.p_bg, "loss_good": l.channel.loss_good,
                                "loss_bad": l.channel.loss_bad, "initial": l.channel.state.value},
                }
                for l in self.legs
            ],
            "bearers": {bid: mode_to_dict(m) for bid, m in self.bearers.items()},
            "flows": [
                {
                    "id": f.qos.flow_id,
                    "qos": {"target_thr_bps": f.qos.target_thr_bps, "latency_budget": f.qos.latency_budget,
                            "reliability_target": f.qos.reliability_target},
                    "traffic": {"kind": f.traffic.kind, "rate_pps": f.traffic.rate_pps,
                                "size_bytes": f.traffic.size_bytes, "start": f.traffic.start,
                                "stop": f.traffic.stop},
                    "bearer": f.bearer,
                    "candidate_legs": list(f.candidate_legs),
                }
                for f in self.flows
            ],
            "faults": [{"leg": x.leg_id, "down_at": x.down_at, "up_at": x.up_at} for x in self.faults],
        }

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def effective_t_reordering(self) -> int:
        if self.t_reordering is not None:
            return self.t_reordering
        return 4 * max(self.prop_ns(l) for l in self.legs)

    @staticmethod
    def prop_ns(l: LegConfig) -> int:
        if l.prop_delay is not None:
            return l.prop_delay
        return round_ns(Fraction(l.distance_m) * NS_PER_S / SPEED_OF_LIGHT)


class _Reader:
    """Typed access to one mapping with location-aware errors."""

    def __init__(self, data, location: str):
        if not isinstance(data, dict):
            raise ScenarioError(location, f"expected a mapping, got {type(data).__name__}")
        self.data = data
        self.loc = location
        self.used: set[str] = set()

    def at(self, key) -> str:
        return f"{self.loc}.{key}" if self.loc else str(key)

    def has(self, key) -> bool:
        return key in self.data and self.data[key] is not None

    def raw(self, key, default=None, required=False):
        self.used.add(key)
        if key not in self.data or self.data[key] is None:
            if required:
                raise MissingFieldError(self.at(key), "required field is missing")
            return default
        return self.data[key]

    def str(self, key, default=None, required=False):
        v = self.raw(key, default, required)
        if v is not None and not isinstance(v, str):
            v = str(v)
        return v

    def number(self, key, default=None, required=False, lo=None, hi=None):
        v = self.raw(key, default, required)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ScenarioError(self.at(key), f"expected a number, got {v!r}")
        if (lo is not None and v < lo) or (hi is not None and v > hi):
            raise ScenarioError(self.at(key), f"value {v} outside [{lo}, {hi}]")
        return v

    def duration(self, key, default=None, required=False, positive=True, allow_zero=False):
        v = self.raw(key, None, required)
        if v is None:
            return default
        ns = parse_duration(v, self.at(key))
        if positive and (ns < 0 or (ns == 0 and not allow_zero)):
            raise NonPositiveDurationError(self.at(key), f"duration must be positive, got {v!r}")
        return ns

    def finish(self):
        extra = sorted(set(map(str, self.data)) - self.used)
        if extra:
            raise ScenarioError(self.at(extra[0]), "unknown field")


def _parse_channel(data, loc) -> GeChannel:
    if data is None:
        return GeChannel()
    r = _Reader(data, loc)
    p_gb = r.number("p_gb", 0.0, lo=0, hi=1)
    p_bg = r.number("p_bg", 1.0, lo=0, hi=1)
    loss_good = r.number("loss_good", 0.0, lo=0, hi=1)
    loss_bad = r.number("loss_bad", 1.0, lo=0, hi=1)
    initial = r.str("initial", "good")
    r.finish()
    if initial not in ("good", "bad"):
        raise ScenarioError(r.at("initial"), "must be 'good' or 'bad'")
    if loss_good > loss_bad:
        raise ScenarioError(loc, f"loss_good ({loss_good}) must not exceed loss_bad ({loss_bad})")
    return GeChannel(p_gb, p_bg, loss_good, loss_bad, initial)


def _parse_mode(data, loc, legs: set[str], owner: str) -> BearerMode:
    r = _Reader(data, loc)
    kind = r.str("mode", required=True)
    try:
        if kind == "single":
            refs = [r.str("leg", required=True)]
            mode = Single(refs[0])
        elif kind == "duplicate":
            refs = [str(x) for x in r.raw("legs", required=True)]
            mode = Duplicate(tuple(refs))
        elif kind == "split":
            weights = r.raw("weights", required=True)
            if not isinstance(weights, dict):
                raise ScenarioError(r.at("weights"), "expected a mapping leg -> integer weight")
            refs = [str(k) for k in weights]
            mode = Split({str(k): v for k, v in weights.items()})
        else:
            raise ScenarioError(r.at("mode"), f"unknown bearer mode {kind!r} (single|duplicate|split)")
    except (ValueError, TypeError) as e:
        if isinstance(e, ScenarioError):
            raise
        raise ScenarioError(loc, str(e)) from None
    r.finish()
    for ref in refs:
        if ref not in legs:
            raise DanglingReferenceError(loc, f"{owner} references undefined leg {ref!r}")
    return mode


def parse_scenario(data, source: str = "") -> Scenario:
    root = _Reader(data, "")
    name = root.str("name", Path(source).stem if source else "scenario")
    sim_duration = root.duration("sim_duration", required=True)
    epoch = root.duration("epoch", 100 * NS_PER_MS)
    master_seed = root.number("master_seed", 0, lo=0)
    if not isinstance(master_seed, int):
        raise ScenarioError("master_seed", "must be an integer")

    legs_raw = root.raw("legs", required=True)
    if not isinstance(legs_raw, list) or not legs_raw:
        raise ScenarioError("legs", "expected a non-empty list")
    legs: list[LegConfig] = []
    seen: set[str] = set()
    for i, item in enumerate(legs_raw):
        loc = f"legs[{i}]"
        r = _Reader(item, loc)
        leg_id = r.str("id", required=True)
        if leg_id in seen:
            raise DuplicateIdError(r.at("id"), f"duplicate leg id {leg_id!r}")
        seen.add(leg_id)
        rat_s = r.str("rat", "terrestrial_nr")
        try:
            rat = RatKind(rat_s)
        except ValueError:
            raise ScenarioError(r.at("rat"), f"unknown rat {rat_s!r}; one of {[k.value for k in RatKind]}") from None
        cap_raw = r.raw("capacity", required=True)
        capacity = parse_rate(cap_raw, r.at("capacity"))
        if capacity <= 0:
            raise ScenarioError(r.at("capacity"), "capacity must be > 0")
        distance = r.number("distance_m", 0.0, lo=0)
        prop = r.duration("prop_delay", None, allow_zero=True)
        queue_cap = r.number("queue_cap", 1000, lo=1)
        if not isinstance(queue_cap, int):
            raise ScenarioError(r.at("queue_cap"), "must be an integer")
        channel = _parse_channel(r.raw("channel"), r.at("channel"))
        r.finish()
        legs.append(LegConfig(leg_id, rat, capacity, distance, prop, queue_cap, channel))
    leg_ids = {l.leg_id for l in legs}

    bearers: dict[str, BearerMode] = {}
    braw = root.raw("bearers", {})
    if not isinstance(braw, dict):
        raise ScenarioError("bearers", "expected a mapping bearer id -> mode")
    for bid, entry in braw.items():
        bearers[str(bid)] = _parse_mode(entry, f"bearers.{bid}", leg_ids, f"bearer {bid!r}")
    default_bearer = root.str("default_bearer")
    if default_bearer is not None and default_bearer not in bearers:
        raise DanglingReferenceError("default_bearer", f"references undefined bearer {default_bearer!r}")

    flows_raw = root.raw("flows", required=True)
    if not isinstance(flows_raw, list) or not flows_raw:
        raise ScenarioError("flows", "expected a non-empty list")
    flows: list[FlowConfig] = []
    flow_ids: set[str] = set()
    for i, item in enumerate(flows_raw):
        loc = f"flows[{i}]"
        r = _Reader(item, loc)
        fid = r.str("id", required=True)
        if fid in flow_ids:
            raise DuplicateIdError(r.at("id"), f"duplicate flow id {fid!r}")
        flow_ids.add(fid)

        t = _Reader(r.raw("traffic", required=True), r.at("traffic"))
        kind = t.str("kind", "cbr")
        rate = t.number("rate_pps", required=True)
        size = t.number("size_bytes", 1500)
        start = t.duration("start", 0, allow_zero=True)
        stop = t.duration("stop", None, allow_zero=True)
        t.finish()
        if isinstance(size, float) and not size.is_integer():
            raise ScenarioError(t.at("size_bytes"), "must be an integer")
        try:
            gen = FlowGen(fid, kind, rate, int(size), start, stop)
        except ValueError as e:
            raise ScenarioError(t.loc, str(e)) from None

        q = _Reader(r.raw("qos", {}), r.at("qos"))
        offered_bps = rate * size * 8
        target = parse_rate(q.raw("target_thr", offered_bps), q.at("target_thr"))
        budget = q.duration("latency_budget", NS_PER_S)
        rel = q.number("reliability_target", 0.0, lo=0, hi=1)
        q.finish()
        try:
            qos = QosFlow(fid, target, budget, rel)
        except ValueError as e:
            raise ScenarioError(q.loc, str(e)) from None

        bearer_ref = r.raw("bearer")
        if bearer_ref is None:
            if default_bearer is None:
                raise MissingFieldError(r.at("bearer"), f"flow {fid!r} has no bearer and no default_bearer is set")
            bearer_id = default_bearer
        elif isinstance(bearer_ref, str):
            if bearer_ref not in bearers:
                raise DanglingReferenceError(r.at("bearer"), f"flow {fid!r} references undefined bearer {bearer_ref!r}")
            bearer_id = bearer_ref
        else:
            bearer_id = fid
            if bearer_id in bearers:
                raise DuplicateIdError(r.at("bearer"), f"inline bearer for flow {fid!r} clashes with bearer id {fid!r}")
            bearers[bearer_id] = _parse_mode(bearer_ref, r.at("bearer"), leg_ids, f"flow {fid!r}")

        cands = r.raw("candidate_legs")
        if cands is None:
            candidates = tuple(l.leg_id for l in legs)
        else:
            candidates = tuple(str(c) for c in cands)
            for c in candidates:
                if c not in leg_ids:
                    raise DanglingReferenceError(r.at("candidate_legs"), f"flow {fid!r} references undefined leg {c!r}")
        r.finish()
        flows.append(FlowConfig(qos, gen, bearer_id, candidates))

    praw = root.raw("policy", {"name": "static"})
    if isinstance(praw, str):
        praw = {"name": praw}
    p = _Reader(praw, "policy")
    policy = p.str("name", "static")
    params = p.raw("params", {})
    if not isinstance(params, dict):
        raise ScenarioError("policy.params", "expected a mapping")
    p.finish()

    faults = []
    for i, item in enumerate(root.raw("faults", []) or []):
        r = _Reader(item, f"faults[{i}]")
        leg_id = r.str("leg", required=True)
        if leg_id not in leg_ids:
            raise DanglingReferenceError(r.at("leg"), f"references undefined leg {leg_id!r}")
        down = r.duration("down_at", required=True, allow_zero=True)
        up = r.duration("up_at", None, allow_zero=True)
        r.finish()
        if up is not None and up <= down:
            raise ScenarioError(r.at("up_at"), "up_at must be after down_at")
        faults.append(Fault(leg_id, down, up))
    by_leg: dict[str, list[Fault]] = {}
    for f in faults:
        by_leg.setdefault(f.leg_id, []).append(f)
    for leg_id, fs in by_leg.items():
        fs = sorted(fs, key=lambda f: f.down_at)
        for a, b in zip(fs, fs[1:]):
            if a.up_at is None or a.up_at > b.down_at:
                raise ScenarioError("faults", f"fault intervals on leg {leg_id!r} overlap")

    t_reord = root.duration("t_reordering", None)
    ack_feedback = root.raw("ack_feedback", True)
    if not isinstance(ack_feedback, bool):
        raise ScenarioError("ack_feedback", "must be true or false")
    ack_delay = root.duration("ack_delay", None, allow_zero=True)
    discard = root.raw("discard_timer", "2s")
    discard_timer = None if discard in ("none", "off") else parse_duration(discard, "discard_timer")
    if discard_timer is not None and discard_timer <= 0:
        raise NonPositiveDurationError("discard_timer", "duration must be positive")
    mdelay = root.number("measurement_delay", 1, lo=0)
    if not isinstance(mdelay, int):
        raise ScenarioError("measurement_delay", "must be an integer number of epochs")
    alpha = root.number("ewma_alpha", 0.3)
    if not 0 < alpha <= 1:
        raise ScenarioError("ewma_alpha", "must be in (0, 1]")
    weights = root.raw("qoe_weights", [0.5, 0.25, 0.25])
    if (not isinstance(weights, list) or len(weights) != 3 or any(isinstance(w, bool) or not isinstance(w, (int, float)) or w < 0 for w in weights)
            or abs(sum(weights) - 1) > 1e-9):
        raise ScenarioError("qoe_weights", "expected three non-negative numbers summing to 1")
    root.finish()

    return Scenario(
        name=name, legs=legs, bearers=bearers, flows=flows, sim_duration=sim_duration, epoch=epoch,
        master_seed=master_seed, policy=policy, policy_params=params, default_bearer=default_bearer,
        faults=faults, t_reordering=t_reord, ack_feedback=ack_feedback, ack_delay=ack_delay,
        discard_timer=discard_timer, measurement_delay=mdelay, ewma_alpha=float(alpha),
        qoe_weights=tuple(float(w) for w in weights),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioError(str(path), f"cannot read scenario: {e.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ScenarioError(str(path), f"invalid YAML: {e}") from None
    try:
        return parse_scenario(data, str(path))
    except ScenarioError as e:
        raise type(e)(f"{path}: {e.location}" if e.location else str(path), e.message) from None
