"""Episodic environment for learning a homogeneous sensing policy.

One episode spans the ``L`` decision windows of a schedule. The agent sees
the bin of ``tr(P)`` at each decision instant, picks how many sensors
process during the window, and receives the negative mean of ``tr(P_k)``
over the half-open window ``[k^(l), k^(l+1))``. The last window ends at the
horizon ``K``.

The episode cost is ``(1/K) * sum_{k=k0}^{K} tr(P_k)``, so it relates to the
rewards by ``cost = -(1/K) * sum_l len_l * r_l + tr(P_K) / K``.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .estimator import CovarianceTrace, DelayedPredictor
from .model import K0, SystemModel
from .sensing import DecisionSchedule, HomogeneousDecision, Mode, SensorNetwork, SensorSpec

BRUTE_FORCE_CAP = 10**6


@dataclass(frozen=True)
class Scenario:
    """Everything that defines an episode except the decisions."""

    model: SystemModel
    sensors: tuple[SensorSpec, ...]
    schedule: DecisionSchedule
    gamma: float = 0.99

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(self.sensors))
        self.schedule.validate_for(self.sensors)
        if not 0 < self.gamma <= 1:
            raise ValueError("discount factor must lie in (0, 1]")

    @property
    def N(self) -> int:
        return len(self.sensors)

    @property
    def L(self) -> int:
        return self.schedule.L

    @property
    def K(self) -> int:
        return self.schedule.horizon

    @property
    def actions(self) -> range:
        return range(self.N + 1)

    def truncated(self, L: int) -> "Scenario":
        """The same scenario cut after ``L`` windows."""
        if not 1 <= L <= self.L:
            raise ValueError(f"cannot truncate {self.L} windows to {L}")
        times = self.schedule.decision_times
        horizon = times[L] if L < self.L else self.schedule.horizon
        return replace(self, schedule=DecisionSchedule(times[:L], horizon))


@dataclass(frozen=True)
class Discretizer:
    """Equal-frequency bins over ``tr(P)``.

    A value goes to the number of edges strictly below it, so ties with an
    edge fall into the lower bin.
    """

    edges: tuple[float, ...]
    M: int

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        if self.M < 1:
            raise ValueError("need at least one bin")
        if len(edges) > self.M - 1:
            raise ValueError(f"{len(edges)} edges do not fit {self.M} bins")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("bin edges must be strictly increasing")

    @classmethod
    def from_samples(cls, samples, M: int) -> "Discretizer":
        if M < 2:
            raise ValueError("equal-frequency binning needs M >= 2")
        samples = np.sort(np.asarray(samples, dtype=float))
        if samples.size == 0:
            raise ValueError("no calibration samples")
        edges = np.quantile(samples, np.arange(1, M) / M)
        # Ties collapse edges; the table keeps M rows regardless.
        edges = np.unique(edges)
        if edges.size and edges[0] <= samples[0]:
            edges = edges[edges > samples[0]]
        return cls(tuple(edges), M)

    def __call__(self, value: float) -> int:
        return int(np.searchsorted(self.edges, value, side="left"))

    def occupancy(self, samples) -> np.ndarray:
        return np.bincount([self(x) for x in samples], minlength=self.M)


@dataclass(frozen=True)
class WindowOutcome:
    window_index: int
    start: int
    stop: int
    state_trace: float
    state_bin: int | None
    action: int
    reward: float
    next_state_trace: float
    next_state_bin: int | None
    discarded: int = 0
    switched: int = 0


@dataclass(frozen=True)
class EpisodeResult:
    outcomes: tuple[WindowOutcome, ...]
    cost: float
    ret: float
    trace: CovarianceTrace = field(repr=False)

    @property
    def decisions(self) -> tuple[int, ...]:
        return tuple(o.action for o in self.outcomes)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([o.reward for o in self.outcomes])

    @property
    def discarded(self) -> int:
        return sum(o.discarded for o in self.outcomes)


def episode_cost(traces: np.ndarray, K: int) -> float:
    """``(1/K) * sum`` of the traces for ``k = k0 .. K``."""
    return float(np.sum(traces) / (K - K0))


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    """``sum_l gamma^l r_l`` with windows counted from ``l = 1``."""
    return float(sum(gamma ** (l + 1) * r for l, r in enumerate(rewards)))


@dataclass(frozen=True)
class StepResult:
    next_state_bin: int | None
    reward: float
    done: bool
    outcome: WindowOutcome
    next_covariance: np.ndarray = field(repr=False)


class SensingEnv:
    """Steps a scenario one decision window at a time.

    Measurements still being generated at a window boundary are carried
    over; the next decision either lets them finish or drops them.
    """

    def __init__(self, scenario: Scenario, discretizer: Discretizer | None = None, advance=None):
        self.scenario = scenario
        self.discretizer = discretizer
        noises = [s.mode(m).noise for s in scenario.sensors for m in Mode]
        self.net = SensorNetwork(scenario.sensors, scenario.K)
        self.pred = DelayedPredictor(scenario.model, noises, advance=advance)
        self.reset()

    def reset(self) -> int | None:
        self.net.reset()
        self.pred.reset()
        self.window = 0
        self.P = np.array(self.scenario.model.P0, dtype=float)
        self._covs: list[np.ndarray] = []
        self._outcomes: list[WindowOutcome] = []
        return self._bin(np.trace(self.P))

    @property
    def done(self) -> bool:
        return self.window >= self.scenario.L

    @property
    def state_trace(self) -> float:
        return float(np.trace(self.P))

    def _bin(self, tr: float) -> int | None:
        return None if self.discretizer is None else self.discretizer(tr)

    def snapshot(self):
        return (
            self.net.snapshot(),
            self.pred.snapshot(),
            self.window,
            self.P,
            list(self._covs),
            list(self._outcomes),
        )

    def restore(self, snap):
        net, pred, self.window, self.P, covs, outcomes = snap
        self.net.restore(net)
        self.pred.restore(pred)
        self._covs, self._outcomes = list(covs), list(outcomes)

    def step(self, action: int) -> StepResult:
        sc = self.scenario
        if self.done:
            raise RuntimeError("episode is over; call reset()")
        if action not in sc.actions:
            raise ValueError(f"action {action} outside 0..{sc.N}")
        l = self.window
        start, stop = sc.schedule.window(l)
        final = l == sc.L - 1
        act = self.net.step(start, stop, action, final=final)
        self.pred.add(act.events)
        floor = None if final else self.net.floor()
        if l == 0:
            Ps = self.pred.advance(start, stop + 1, floor)
            segment = Ps[:-1]
        else:
            Ps = self.pred.advance(start + 1, stop + 1, floor)
            segment = np.concatenate([self.P[None], Ps[:-1]])
        self._covs.append(segment)
        P_next = Ps[-1]
        seg_tr = np.trace(segment, axis1=1, axis2=2)
        reward = -float(np.mean(seg_tr))
        tr_now, tr_next = float(seg_tr[0]), float(np.trace(P_next))
        outcome = WindowOutcome(
            window_index=l,
            start=start,
            stop=stop,
            state_trace=tr_now,
            state_bin=self._bin(tr_now),
            action=action,
            reward=reward,
            next_state_trace=tr_next,
            next_state_bin=self._bin(tr_next),
            discarded=len(act.discarded),
            switched=len(act.switched),
        )
        self._outcomes.append(outcome)
        self.P = P_next
        self.window += 1
        return StepResult(outcome.next_state_bin, reward, self.done, outcome, P_next)

    def result(self) -> EpisodeResult:
        if not self.done:
            raise RuntimeError("episode still running")
        covs = np.concatenate(self._covs + [self.P[None]])
        trace = CovarianceTrace.from_covariances(K0, covs)
        rewards = [o.reward for o in self._outcomes]
        return EpisodeResult(
            tuple(self._outcomes),
            episode_cost(trace.traces, self.scenario.K),
            discounted_return(rewards, self.scenario.gamma),
            trace,
        )


def _actions(decisions) -> list[int]:
    return [d.num_processing if isinstance(d, HomogeneousDecision) else int(d) for d in decisions]


def run_episode(
    scenario: Scenario,
    decisions: Sequence[int | HomogeneousDecision],
    discretizer: Discretizer | None = None,
) -> EpisodeResult:
    actions = _actions(decisions)
    if len(actions) != scenario.L:
        raise ValueError(f"expected {scenario.L} decisions, got {len(actions)}")
    env = SensingEnv(scenario, discretizer)
    for a in actions:
        env.step(a)
    return env.result()


def static_policy(scenario: Scenario, a: int) -> tuple[int, ...]:
    """Decisions of the All-``a`` policy."""
    return (a,) * scenario.L


def _score(args):
    scenario, decisions, with_return = args
    res = run_episode(scenario, decisions)
    return (res.cost, res.ret) if with_return else res.cost


def evaluate_many(
    scenario: Scenario, policies: Sequence[Sequence[int]], jobs: int = 1, with_return: bool = False
) -> list:
    """Costs (or ``(cost, return)`` pairs) of several decision sequences.

    With ``jobs > 1`` the episodes run in worker processes.
    """
    work = [(scenario, tuple(p), with_return) for p in policies]
    if jobs <= 1 or len(work) <= 1:
        return [_score(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_score, work))


def calibration_samples(scenario: Scenario) -> np.ndarray:
    """``tr(P)`` at every decision instant of every All-``a`` episode."""
    out = []
    for a in scenario.actions:
        res = run_episode(scenario, static_policy(scenario, a))
        out.extend(o.state_trace for o in res.outcomes)
    return np.array(out)


def calibrate_discretizer(scenario: Scenario, M: int) -> Discretizer:
    return Discretizer.from_samples(calibration_samples(scenario), M)


def brute_force_best(scenario: Scenario, L_small: int) -> tuple[tuple[int, ...], float]:
    """Exhaustive search over all homogeneous decision sequences of ``L_small`` windows.

    Sequences sharing a prefix share the simulation of that prefix.
    """
    size = (scenario.N + 1) ** L_small
    if size > BRUTE_FORCE_CAP:
        raise ValueError(f"{size} sequences exceed the brute-force cap of {BRUTE_FORCE_CAP}")
    sc = scenario.truncated(L_small)
    env = SensingEnv(sc)
    best: tuple[tuple[int, ...], float] = ((), np.inf)

    def search(prefix: tuple[int, ...]):
        nonlocal best
        snap = env.snapshot()
        for a in sc.actions:
            env.restore(snap)
            env.step(a)
            seq = prefix + (a,)
            if env.done:
                cost = env.result().cost
                if cost < best[1]:
                    best = (seq, cost)
            else:
                search(seq)

    search(())
    return best


def all_sequences(N: int, L: int):
    return itertools.product(range(N + 1), repeat=L)
