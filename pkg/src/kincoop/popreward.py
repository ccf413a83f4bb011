"""Population-level rewards over birth/death traces, plus a minimal sandbox.

The three reward signals value the survival of an agent's genetic material:
counting distinct related genotypes alive (longevity), similarity-weighted
births minus deaths (replication), and similarity-weighted living copies
(combined). The sandbox generates traces that exercise all three on dynamic
populations: health decays one point per step, food replenishes it, and
reproduction hands a quarter of the parent's health to a mutated child.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple, Optional, Protocol, TextIO

import numpy as np

from .games import Action
from .genotype import Genotype, GenotypeSpace, MutationSpec, hamming_similarity, mutate
from .ioutil import fmt
from .learning import LearnerConfig, QTable, epsilon_at, select_action


@dataclass(frozen=True)
class PopulationState:
    """Multiset of (agent id, genotype) pairs alive at one time step."""

    alive: tuple[tuple[int, Genotype], ...]

    def __post_init__(self):
        ids = [aid for aid, _ in self.alive]
        if len(ids) != len(set(ids)):
            raise ValueError("agent ids must be unique within a state")

    @property
    def unique_genotypes(self) -> frozenset[Genotype]:
        return frozenset(g for _, g in self.alive)

    def __len__(self) -> int:
        return len(self.alive)


class RewardTriple(NamedTuple):
    longevity: float
    replication: float
    combined: float


def longevity_reward(me: Genotype, state: PopulationState) -> float:
    """Sum of similarities to the distinct genotypes alive.

    Each genotype counts once no matter how many agents carry it: one
    living copy is enough for the information to persist.
    """
    return float(sum(hamming_similarity(me, g) for g in state.unique_genotypes))


def combined_reward(me: Genotype, state: PopulationState) -> float:
    """Sum of similarities to every living agent, copies included."""
    return float(sum(hamming_similarity(me, g) for _, g in state.alive))


def replication_reward(
    me: Genotype, prev: PopulationState, curr: PopulationState
) -> float:
    """Similarity-weighted births minus deaths between consecutive states.

    Computed from the id-level birth/death events, which makes it equal to
    the change in the combined reward without being derived from it.
    """
    prev_ids = {aid for aid, _ in prev.alive}
    curr_ids = {aid for aid, _ in curr.alive}
    born = sum(hamming_similarity(me, g) for aid, g in curr.alive if aid not in prev_ids)
    died = sum(hamming_similarity(me, g) for aid, g in prev.alive if aid not in curr_ids)
    return float(born - died)


class _SimilarityMemo:
    """Pair-keyed cache so trace evaluation scales with distinct genotypes."""

    def __init__(self):
        self._cache: dict[tuple[tuple[int, ...], tuple[int, ...]], float] = {}

    def __call__(self, a: Genotype, b: Genotype) -> float:
        key = (a.genes, b.genes) if a.genes <= b.genes else (b.genes, a.genes)
        h = self._cache.get(key)
        if h is None:
            h = hamming_similarity(a, b)
            self._cache[key] = h
        return h


def _step_rewards(
    prev: PopulationState, curr: PopulationState, sim: _SimilarityMemo
) -> dict[int, RewardTriple]:
    counts = Counter(g for _, g in curr.alive)
    prev_ids = {aid for aid, _ in prev.alive}
    curr_ids = {aid for aid, _ in curr.alive}
    born = [g for aid, g in curr.alive if aid not in prev_ids]
    died = [g for aid, g in prev.alive if aid not in curr_ids]
    rewards: dict[int, RewardTriple] = {}
    for aid, g in curr.alive:
        r_long = sum(sim(g, u) for u in counts)
        r_comb = sum(c * sim(g, u) for u, c in counts.items())
        r_repl = sum(sim(g, u) for u in born) - sum(sim(g, u) for u in died)
        rewards[aid] = RewardTriple(float(r_long), float(r_repl), float(r_comb))
    return rewards


def evaluate_rewards(trace: "PopulationTrace") -> list[dict[int, RewardTriple]]:
    """All three rewards for every living agent at every step t >= 1."""
    sim = _SimilarityMemo()
    return [
        _step_rewards(trace.states[t - 1], trace.states[t], sim)
        for t in range(1, len(trace.states))
    ]


# ---------------------------------------------------------------------------
# Sandbox
# ---------------------------------------------------------------------------

@dataclass
class SandboxAgent:
    agent_id: int
    genotype: Genotype
    health: float


class ReproductionPolicy(Protocol):
    """Decides, per living agent and step, whether to reproduce."""

    def decide(self, agent: SandboxAgent, rng: np.random.Generator) -> bool: ...

    def feedback(self, agent_id: int, reproduced: bool, rewards: RewardTriple) -> None: ...


class IdlePolicy:
    """Never reproduces."""

    def decide(self, agent, rng):
        return False

    def feedback(self, agent_id, reproduced, rewards):
        pass


class AlwaysReproducePolicy:
    """Reproduces every step the health transfer is possible."""

    def decide(self, agent, rng):
        return True

    def feedback(self, agent_id, reproduced, rewards):
        pass


class RandomPolicy:
    """Reproduces with a fixed per-step probability."""

    def __init__(self, p: float):
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must be in [0, 1]")
        self.p = p

    def decide(self, agent, rng):
        return bool(rng.random() < self.p)

    def feedback(self, agent_id, reproduced, rewards):
        pass


class ThresholdPolicy:
    """Reproduces whenever health is at or above a threshold."""

    def __init__(self, min_health: float):
        self.min_health = min_health

    def decide(self, agent, rng):
        return agent.health >= self.min_health

    def feedback(self, agent_id, reproduced, rewards):
        pass


class QReproductionPolicy:
    """Single-state Q-learner over {reproduce, idle}, one table per agent.

    Optimizes one of the three population rewards, chosen by name. Each
    agent explores on its own clock, starting at its birth.
    """

    REWARD_KINDS = ("longevity", "replication", "combined")

    def __init__(self, learner: LearnerConfig, reward_kind: str = "combined"):
        if learner.decay is None:
            raise ValueError("learner decay must be resolved for the sandbox policy")
        if reward_kind not in self.REWARD_KINDS:
            raise ValueError(f"reward_kind must be one of {self.REWARD_KINDS}")
        self.learner = learner
        self.reward_kind = reward_kind
        self.tables: dict[int, QTable] = {}
        self.steps: dict[int, int] = {}

    def decide(self, agent, rng):
        table = self.tables.setdefault(agent.agent_id, QTable(self.learner.q_init))
        t = self.steps.get(agent.agent_id, 0)
        self.steps[agent.agent_id] = t + 1
        eps = epsilon_at(self.learner, t)
        # the COOPERATE slot doubles as "reproduce", DEFECT as "idle"
        return select_action(table, 0, eps, rng) is Action.COOPERATE

    def feedback(self, agent_id, reproduced, rewards):
        table = self.tables.get(agent_id)
        if table is None:
            return
        action = Action.COOPERATE if reproduced else Action.DEFECT
        table.update(0, action, getattr(rewards, self.reward_kind), self.learner.alpha)


@dataclass(frozen=True)
class SandboxConfig:
    space: GenotypeSpace
    initial_genotype: Genotype
    mutation: MutationSpec
    initial_health: float
    food_rate: int
    steps: int
    policy: ReproductionPolicy

    def __post_init__(self):
        if self.initial_health <= 0:
            raise ValueError("initial_health must be > 0")
        if self.food_rate < 0:
            raise ValueError("food_rate must be >= 0")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if not self.space.contains(self.initial_genotype):
            raise ValueError("initial genotype must belong to the genotype space")


@dataclass
class PopulationTrace:
    """Time-ordered population states with the events that connect them.

    ``states[0]`` is the initial population; step t produced ``states[t]``.
    ``healths[t]`` aligns with ``states[t].alive``. Deaths record each
    agent's final (non-positive) health so energy bookkeeping stays exact.
    """

    states: list[PopulationState]
    healths: list[tuple[float, ...]]
    births: list[tuple[tuple[int, Genotype], ...]]
    deaths: list[tuple[tuple[int, Genotype, float], ...]]
    food_consumed: list[float]
    pop_before: list[int]
    extinct_at: Optional[int] = None
    rewards: Optional[list[dict[int, RewardTriple]]] = None

    @property
    def steps(self) -> int:
        return len(self.states) - 1


def run_sandbox(config: SandboxConfig, rng: np.random.Generator) -> PopulationTrace:
    """Generate a birth/death trace under the sandbox dynamics.

    Per step: one health point decays; food units land on uniformly random
    living agents (+1 health each, capped at the initial level, so a unit
    can arrive partially or be wasted); the policy decides reproduction,
    which moves exactly a quarter of the parent's current health to a
    mutated child (skipped if that share would not be positive); agents at
    or below zero health are then removed. Extinction ends the trace early.

    Rewards for all three signals are recorded every step; agents that
    acted receive their chosen reward back through the policy's feedback
    hook, so learning policies train online.
    """
    agents: dict[int, SandboxAgent] = {
        0: SandboxAgent(0, config.initial_genotype, float(config.initial_health))
    }
    next_id = 1

    def snapshot() -> tuple[PopulationState, tuple[float, ...]]:
        alive = tuple((a.agent_id, a.genotype) for a in agents.values())
        return PopulationState(alive), tuple(a.health for a in agents.values())

    state0, health0 = snapshot()
    trace = PopulationTrace(
        states=[state0],
        healths=[health0],
        births=[],
        deaths=[],
        food_consumed=[],
        pop_before=[],
        rewards=[],
    )
    sim = _SimilarityMemo()

    for t in range(1, config.steps + 1):
        if not agents:
            break
        living = list(agents.values())
        trace.pop_before.append(len(living))

        for a in living:
            a.health -= 1.0

        consumed = 0.0
        if config.food_rate > 0:
            targets = rng.integers(0, len(living), size=config.food_rate)
            for idx in targets:
                a = living[int(idx)]
                gain = min(1.0, config.initial_health - a.health)
                if gain > 0:
                    a.health += gain
                    consumed += gain
        trace.food_consumed.append(consumed)

        decisions: dict[int, bool] = {}
        newborns: list[SandboxAgent] = []
        for a in living:
            reproduced = False
            if config.policy.decide(a, rng):
                share = a.health / 4.0
                if share > 0:
                    a.health -= share
                    child = SandboxAgent(
                        next_id, mutate(a.genotype, config.mutation, config.space, rng), share
                    )
                    newborns.append(child)
                    next_id += 1
                    reproduced = True
            decisions[a.agent_id] = reproduced
        for child in newborns:
            agents[child.agent_id] = child

        dead = [(a.agent_id, a.genotype, a.health) for a in agents.values() if a.health <= 0]
        for aid, _, _ in dead:
            del agents[aid]

        state, healths = snapshot()
        trace.states.append(state)
        trace.healths.append(healths)
        trace.births.append(tuple((c.agent_id, c.genotype) for c in newborns))
        trace.deaths.append(tuple(dead))

        step_rewards = _step_rewards(trace.states[t - 1], state, sim)
        trace.rewards.append(step_rewards)
        for aid, reproduced in decisions.items():
            if aid in step_rewards:
                config.policy.feedback(aid, reproduced, step_rewards[aid])

        if not agents:
            trace.extinct_at = t
            break

    return trace


def replication_identity_error(trace: PopulationTrace) -> float:
    """Worst mismatch between the two replication-reward routes.

    Compares the event-based replication stream against the step-to-step
    difference of the state-summed combined reward; both are exact
    descriptions of the same quantity, so anything beyond float noise
    indicates a bookkeeping bug.
    """
    rewards = trace.rewards if trace.rewards is not None else evaluate_rewards(trace)
    worst = 0.0
    for t in range(1, len(trace.states)):
        prev, curr = trace.states[t - 1], trace.states[t]
        for aid, g in curr.alive:
            delta = combined_reward(g, curr) - combined_reward(g, prev)
            worst = max(worst, abs(rewards[t - 1][aid].replication - delta))
    return worst


def write_trace_csv(trace: PopulationTrace, stream: TextIO) -> None:
    """Per-step records: survivors and newborns, then deaths with final health."""
    writer = csv.writer(stream)
    writer.writerow(["t", "agent_id", "genotype", "health", "event"])
    for t in range(1, len(trace.states)):
        state, healths = trace.states[t], trace.healths[t]
        born = {aid for aid, _ in trace.births[t - 1]}
        for (aid, g), health in zip(state.alive, healths):
            event = "birth" if aid in born else "none"
            writer.writerow([t, aid, g.to_string(), fmt(health), event])
        for aid, g, final_health in trace.deaths[t - 1]:
            writer.writerow([t, aid, g.to_string(), fmt(final_health), "death"])


def write_rewards_csv(trace: PopulationTrace, stream: TextIO) -> None:
    """Reward streams per step and living agent, all three signals."""
    rewards = trace.rewards if trace.rewards is not None else evaluate_rewards(trace)
    writer = csv.writer(stream)
    writer.writerow(["t", "agent_id", "r_longevity", "r_replication", "r_combined"])
    for t_idx, step_rewards in enumerate(rewards):
        state = trace.states[t_idx + 1]
        for aid, _ in state.alive:
            triple = step_rewards[aid]
            writer.writerow(
                [t_idx + 1, aid, fmt(triple.longevity), fmt(triple.replication), fmt(triple.combined)]
            )
