"""Episodic Q-learning against a scenario."""

from __future__ import annotations

import logging

from ..control.policies import RlPolicy, make_policy
from ..control.qlearning import QTable, save_checkpoint
from .scenario import Scenario
from .simulation import Simulation

log = logging.getLogger(__name__)


def train_rl(scenario: Scenario, episodes: int, checkpoint=None, seed: int | None = None,
             params: dict | None = None) -> tuple[QTable, RlPolicy]:
    """Run ``episodes`` training episodes sharing one Q-table.

    Episode ``i`` uses seed ``seed + i``. The table is saved to
    ``checkpoint`` after the last episode when a path is given.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    seed = scenario.master_seed if seed is None else seed
    if params is None:
        params = dict(scenario.policy_params) if scenario.policy == "rl" else {}
    params = {k: v for k, v in params.items() if k not in ("train", "checkpoint")}
    policy = make_policy("rl", {**params, "train": True})
    for i in range(episodes):
        Simulation(scenario, seed + i, policy).run()
        log.info("episode %d/%d: %d epochs, %d updates", i + 1, episodes, policy.total_epochs, policy.updates)
    if checkpoint is not None:
        save_checkpoint(policy.q, checkpoint)
    return policy.q, policy
