"""Independent tabular Q-learners: myopic updates, decaying epsilon-greedy."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Hashable, Mapping, Optional, TextIO

import numpy as np

from .games import Action

StateId = Hashable

# Epsilon level the default decay schedule is calibrated to hit at 80% of
# the step budget; exploration beyond that point is residual.
DECAY_TARGET_EPSILON = 0.01
DECAY_TARGET_FRACTION = 0.8


@dataclass(frozen=True)
class LearnerConfig:
    """Hyperparameters for a single myopic epsilon-greedy Q-learner.

    ``decay=None`` means "derive from the step budget": the schedule is
    chosen so epsilon falls to 0.01 at 80% of the configured number of
    steps (see ``resolve_decay``).
    """

    alpha: float = 1.0
    epsilon0: float = 1.0
    decay: float | None = None
    epsilon_min: float = 0.001
    q_init: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if not 0.0 <= self.epsilon0 <= 1.0:
            raise ValueError("epsilon0 must be in [0, 1]")
        if self.decay is not None and not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must be in (0, 1]")
        if not 0.0 <= self.epsilon_min <= self.epsilon0:
            raise ValueError("epsilon_min must be in [0, epsilon0]")


def resolve_decay(config: LearnerConfig, steps_max: int) -> LearnerConfig:
    """Fill in a budget-derived decay factor when none was given."""
    if config.decay is not None:
        return config
    if steps_max <= 0:
        raise ValueError("steps_max must be positive to derive a decay factor")
    horizon = max(1.0, DECAY_TARGET_FRACTION * steps_max)
    if config.epsilon0 <= DECAY_TARGET_EPSILON:
        return replace(config, decay=1.0)
    return replace(config, decay=(DECAY_TARGET_EPSILON / config.epsilon0) ** (1.0 / horizon))


def q_update(q: float, reward: float, alpha: float) -> float:
    """One myopic value update; no bootstrap term since the discount is 0."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    return q + alpha * (reward - q)


def epsilon_at(config: LearnerConfig, t: int) -> float:
    """Exploration rate at step t: exponential decay with a floor."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if config.decay is None:
        raise ValueError("decay is unresolved; call resolve_decay first")
    return max(config.epsilon_min, config.epsilon0 * config.decay**t)


class QTable:
    """Per-agent action-value store over opaque state ids.

    Missing entries read as ``q_init``; states are created lazily on update.
    """

    def __init__(self, q_init: float = 0.0):
        self.q_init = q_init
        self.values: dict[tuple[StateId, Action], float] = {}

    def get(self, state: StateId, action: Action) -> float:
        return self.values.get((state, action), self.q_init)

    def update(self, state: StateId, action: Action, reward: float, alpha: float) -> None:
        self.values[(state, action)] = q_update(self.get(state, action), reward, alpha)

    def states(self) -> list[StateId]:
        return sorted({s for s, _ in self.values}, key=repr)


def greedy_action(table: QTable, state: StateId) -> Optional[Action]:
    """Deterministic argmax; None signals an exact tie."""
    q_c = table.get(state, Action.COOPERATE)
    q_d = table.get(state, Action.DEFECT)
    if q_c > q_d:
        return Action.COOPERATE
    if q_d > q_c:
        return Action.DEFECT
    return None


def select_action(
    table: QTable, state: StateId, epsilon: float, rng: np.random.Generator
) -> Action:
    """Epsilon-greedy draw; exact ties are broken by a fair coin.

    Randomized tie-breaking avoids a systematic first-action bias at the
    all-equal initialization.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    if rng.random() < epsilon:
        return Action(int(rng.integers(2)))
    best = greedy_action(table, state)
    if best is None:
        return Action(int(rng.integers(2)))
    return best


def write_qtables_csv(tables: Mapping[Hashable, QTable], stream: TextIO) -> None:
    """Dump Q-tables as "agent,state,action,value" rows for inspection."""
    writer = csv.writer(stream)
    writer.writerow(["agent", "state", "action", "value"])
    for agent in sorted(tables, key=repr):
        table = tables[agent]
        for state in table.states():
            for action in (Action.COOPERATE, Action.DEFECT):
                writer.writerow([agent, state, action.short, repr(table.get(state, action))])
