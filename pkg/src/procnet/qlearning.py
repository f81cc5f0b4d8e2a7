"""Tabular Q-learning over binned ``tr(P)`` states and ``0..N`` processing sensors."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .env import Discretizer, EpisodeResult, Scenario, SensingEnv

log = logging.getLogger(__name__)


@dataclass
class QTable:
    values: np.ndarray
    visits: np.ndarray

    @classmethod
    def zeros(cls, n_states: int, n_actions: int) -> "QTable":
        return cls(np.zeros((n_states, n_actions)), np.zeros((n_states, n_actions), dtype=np.int64))

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]

    def greedy(self, s: int) -> int:
        # np.argmax returns the first maximizer: ties go to the lowest action
        return int(np.argmax(self.values[s]))

    def policy(self) -> tuple[int, ...]:
        return tuple(int(a) for a in np.argmax(self.values, axis=1))

    def copy(self) -> "QTable":
        return QTable(self.values.copy(), self.visits.copy())


@dataclass(frozen=True)
class LearningParams:
    alpha: float = 0.01
    gamma: float = 0.99
    eps_max: float = 0.9
    eps_min: float = 0.1
    episodes: int = 20000
    seed: int = 0
    early_stop: int = 2000
    eval_every: int = 100

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("learning rate must lie in (0, 1]")
        if not 0 < self.gamma <= 1:
            raise ValueError("discount factor must lie in (0, 1]")
        if not 0 <= self.eps_min <= self.eps_max <= 1:
            raise ValueError("need 0 <= eps_min <= eps_max <= 1")
        if self.episodes < 1:
            raise ValueError("need at least one episode")
        if self.early_stop < 0 or self.eval_every < 0:
            raise ValueError("early_stop and eval_every must be non-negative")

    def epsilon(self, t: int) -> float:
        """Exploration rate of episode ``t`` (counted from 1)."""
        return max(self.eps_max / math.sqrt(t), self.eps_min)


class Transition(NamedTuple):
    s: int
    a: int
    r: float
    s_next: int


def td_error(q: QTable, s: int, a: int, r: float, s_next: int, gamma: float) -> float:
    return r + gamma * float(np.max(q.values[s_next])) - float(q.values[s, a])


def q_update(q: QTable, tr: Transition, is_terminal: bool, alpha: float, gamma: float) -> QTable:
    """In-place Q-learning update; the last window of an episode does not bootstrap."""
    s, a, r, s_next = tr
    if is_terminal:
        q.values[s, a] = (1 - alpha) * q.values[s, a] + alpha * r
    else:
        q.values[s, a] += alpha * td_error(q, s, a, r, s_next, gamma)
    q.visits[s, a] += 1
    return q


def select_action(q: QTable, s: int, epsilon: float, rng: np.random.Generator) -> int:
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(q.n_actions))
    return q.greedy(s)


def run_greedy(scenario: Scenario, discretizer: Discretizer, q: QTable) -> EpisodeResult:
    """Deploy the greedy policy of ``q`` for one (deterministic) episode."""
    if q.n_actions != scenario.N + 1:
        raise ValueError(f"table has {q.n_actions} actions, scenario needs {scenario.N + 1}")
    env = SensingEnv(scenario, discretizer)
    s = env.reset()
    while not env.done:
        s = env.step(q.greedy(s)).next_state_bin
    return env.result()


@dataclass
class TrainingResult:
    table: QTable
    policy: tuple[int, ...]
    returns: np.ndarray
    greedy_evals: list[tuple[int, float, float]] = field(default_factory=list)
    episodes_run: int = 0


def train(
    scenario: Scenario,
    discretizer: Discretizer,
    params: LearningParams,
    callback: Callable[[int, float], None] | None = None,
) -> TrainingResult:
    """Learn a sensing policy with epsilon-greedy tabular Q-learning.

    ``returns`` holds the discounted return of every deployed (exploring)
    episode. ``greedy_evals`` holds ``(episode, cost, return)`` of the greedy
    policy every ``params.eval_every`` episodes. Training stops early once
    the greedy policy has not changed for ``params.early_stop`` episodes
    (0 disables this).
    """
    rng = np.random.default_rng(params.seed)
    q = QTable.zeros(discretizer.M, scenario.N + 1)
    env = SensingEnv(scenario, discretizer)
    returns = np.empty(params.episodes)
    evals: list[tuple[int, float, float]] = []
    policy = q.policy()
    unchanged = 0
    t = 0
    for t in range(1, params.episodes + 1):
        eps = params.epsilon(t)
        s = env.reset()
        while not env.done:
            a = select_action(q, s, eps, rng)
            step = env.step(a)
            q_update(q, Transition(s, a, step.reward, step.next_state_bin), step.done,
                     params.alpha, params.gamma)
            s = step.next_state_bin
        returns[t - 1] = env.result().ret
        if callback is not None:
            callback(t, returns[t - 1])
        if params.eval_every and t % params.eval_every == 0:
            res = run_greedy(scenario, discretizer, q)
            evals.append((t, res.cost, res.ret))
        new_policy = q.policy()
        unchanged = unchanged + 1 if new_policy == policy else 0
        policy = new_policy
        if params.early_stop and unchanged >= params.early_stop:
            log.info("greedy policy stable for %d episodes; stopping at %d", unchanged, t)
            break
    return TrainingResult(q, policy, returns[:t], evals, t)
