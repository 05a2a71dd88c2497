"""Policy outputs and their validation/application against the data plane."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Protocol

from ..stack.bearer import BearerMode, Duplicate, Single, Split

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Switch:
    to_leg: str


@dataclass(frozen=True)
class SetSplit:
    weights: tuple[tuple[str, int], ...]

    def __post_init__(self):
        if isinstance(self.weights, dict):
            object.__setattr__(self, "weights", tuple(self.weights.items()))


@dataclass(frozen=True)
class SetDuplicate:
    legs: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "legs", tuple(self.legs))


@dataclass(frozen=True)
class NoChange:
    pass


Action = Switch | SetSplit | SetDuplicate | NoChange


@dataclass(frozen=True)
class Directive:
    flow_id: str
    action: Action


class DataPlane(Protocol):
    def has_flow(self, flow_id: str) -> bool: ...
    def has_leg(self, leg_id: str) -> bool: ...
    def leg_up(self, leg_id: str) -> bool: ...
    def mode_of(self, flow_id: str) -> BearerMode: ...
    def switch(self, flow_id: str, to_leg: str) -> int: ...
    def set_mode(self, flow_id: str, mode: BearerMode) -> None: ...


def target_mode(action: Action) -> BearerMode | None:
    """The bearer mode an action asks for; raises ValueError if malformed."""
    if isinstance(action, Switch):
        return Single(action.to_leg)
    if isinstance(action, SetDuplicate):
        return Duplicate(action.legs)
    if isinstance(action, SetSplit):
        return Split(action.weights)
    return None


def validate(directive: Directive, dp: DataPlane) -> str | None:
    """Reason for rejection, or None when the directive can be applied."""
    if not dp.has_flow(directive.flow_id):
        return f"unknown flow {directive.flow_id!r}"
    action = directive.action
    if isinstance(action, NoChange):
        return None
    if not isinstance(action, (Switch, SetSplit, SetDuplicate)):
        return f"unsupported action {action!r}"
    try:
        mode = target_mode(action)
    except (ValueError, TypeError) as e:
        return str(e)
    for leg in mode.legs:
        if not dp.has_leg(leg):
            return f"unknown leg {leg!r}"
    if isinstance(action, Switch) and not dp.leg_up(action.to_leg):
        return f"switch target {action.to_leg!r} is down"
    return None


def apply_directives(directives, dp: DataPlane, sim):
    """Schedule every valid directive at the current epoch boundary.

    Returns (scheduled events, [(directive, reason)] rejected). A rejected
    directive never touches the bearer; the others still apply.
    """
    scheduled, rejected = [], []
    for d in directives:
        reason = validate(d, dp)
        if reason is not None:
            log.warning("rejected directive %s: %s", d, reason)
            rejected.append((d, reason))
            continue
        if isinstance(d.action, NoChange):
            continue
        scheduled.append(sim.schedule(0, _apply, dp, d))
    return scheduled, rejected


def _apply(dp: DataPlane, d: Directive):
    if isinstance(d.action, Switch):
        dp.switch(d.flow_id, d.action.to_leg)
    else:
        dp.set_mode(d.flow_id, target_mode(d.action))
