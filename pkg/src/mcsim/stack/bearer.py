"""Bearer delivery modes and the split scheduler."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Single:
    leg: str

    @property
    def legs(self) -> tuple[str, ...]:
        return (self.leg,)

    def label(self) -> str:
        return f"single:{self.leg}"


@dataclass(frozen=True)
class Duplicate:
    leg_set: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "leg_set", tuple(self.leg_set))
        if len(set(self.leg_set)) != len(self.leg_set):
            raise ValueError(f"duplicate leg in {self.leg_set}")
        if len(self.leg_set) < 2:
            raise ValueError("Duplicate needs at least 2 distinct legs")

    @property
    def legs(self) -> tuple[str, ...]:
        return self.leg_set

    def label(self) -> str:
        return "duplicate:" + "+".join(self.leg_set)


@dataclass(frozen=True)
class Split:
    weights: tuple[tuple[str, int], ...]

    def __post_init__(self):
        items = self.weights.items() if isinstance(self.weights, dict) else self.weights
        items = tuple((str(k), v) for k, v in items)
        if not items:
            raise ValueError("Split needs at least one leg")
        for leg, w in items:
            if not isinstance(w, int) or isinstance(w, bool) or w <= 0:
                raise ValueError(f"Split weight for {leg!r} must be a positive integer, got {w!r}")
        if len({leg for leg, _ in items}) != len(items):
            raise ValueError("duplicate leg in Split weights")
        object.__setattr__(self, "weights", items)

    @property
    def legs(self) -> tuple[str, ...]:
        return tuple(leg for leg, _ in self.weights)

    def weight_map(self) -> dict[str, int]:
        return dict(self.weights)

    def label(self) -> str:
        return "split:" + "+".join(f"{leg}={w}" for leg, w in self.weights)


BearerMode = Single | Duplicate | Split


def mode_to_dict(mode: BearerMode) -> dict:
    if isinstance(mode, Single):
        return {"mode": "single", "leg": mode.leg}
    if isinstance(mode, Duplicate):
        return {"mode": "duplicate", "legs": list(mode.leg_set)}
    return {"mode": "split", "weights": mode.weight_map()}


class DeficitRoundRobin:
    """Deficit round-robin over integer weights, unit cost per SDU.

    The pointer stays on a leg until its credit is spent, then moves on and
    tops up the next leg by its weight. Weights (2, 1) give A, A, B, A, A, B...
    """

    def __init__(self, weights):
        items = list(weights.items() if isinstance(weights, dict) else weights)
        self._legs = [leg for leg, _ in items]
        self._weights = [w for _, w in items]
        self._credit = [0] * len(items)
        self._idx = 0
        self._credit[0] = self._weights[0]

    def next_leg(self) -> str:
        while self._credit[self._idx] < 1:
            self._idx = (self._idx + 1) % len(self._legs)
            self._credit[self._idx] += self._weights[self._idx]
        self._credit[self._idx] -= 1
        return self._legs[self._idx]
