"""Smart-sensor sampling under a centralized homogeneous sensing policy.

Each sensor works on one sample at a time: a sample started at ``k`` in a
mode with generation delay ``g`` completes at ``k + g``, is handed to the
channel, and the next sample starts at ``k + g``. The base station receives
it ``comm_delay`` steps later.

At every decision instant the number of processing sensors is set to the
commanded value by switching as few sensors as possible. A switched sensor
drops the sample it is still generating and starts a fresh one at the
decision instant. Samples already handed to the channel are never dropped.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import K0, NoiseCovariance


class Mode(enum.IntEnum):
    RAW = 0
    PROCESSED = 1

    @property
    def short(self) -> str:
        return "R" if self is Mode.RAW else "P"


@dataclass(frozen=True)
class SensingMode:
    kind: Mode
    gen_delay: int
    comm_delay: int
    noise: NoiseCovariance

    def __post_init__(self):
        if self.gen_delay < 1:
            raise ValueError("generation delay must be at least one step")
        if self.comm_delay < 1:
            raise ValueError("communication delay must be at least one step")

    @property
    def rec_delay(self) -> int:
        """Steps from acquisition to delivery at the base station."""
        return self.gen_delay + self.comm_delay


@dataclass(frozen=True)
class SensorSpec:
    id: int
    raw: SensingMode
    processed: SensingMode

    def __post_init__(self):
        if self.raw.kind is not Mode.RAW or self.processed.kind is not Mode.PROCESSED:
            raise ValueError("mode kinds do not match their slots")
        if not self.processed.gen_delay > self.raw.gen_delay:
            raise ValueError("processing must take longer than raw sampling")
        gap = self.raw.noise.V - self.processed.noise.V
        if np.linalg.eigvalsh(0.5 * (gap + gap.T)).min() <= 0:
            raise ValueError("raw noise must dominate processed noise in the Loewner order")
        if self.processed.comm_delay > self.raw.comm_delay:
            raise ValueError("processed data cannot take longer to transmit than raw data")

    def mode(self, kind: Mode) -> SensingMode:
        return self.raw if kind is Mode.RAW else self.processed


def homogeneous_sensors(N: int, raw: SensingMode, processed: SensingMode) -> list[SensorSpec]:
    return [SensorSpec(i, raw, processed) for i in range(N)]


@dataclass(frozen=True)
class DecisionSchedule:
    """Decision instants ``k^(1) < ... < k^(L)`` and the horizon ``K``."""

    decision_times: tuple[int, ...]
    horizon: int

    def __post_init__(self):
        times = tuple(int(t) for t in self.decision_times)
        object.__setattr__(self, "decision_times", times)
        if not times:
            raise ValueError("schedule needs at least one decision")
        if times[0] != K0:
            raise ValueError(f"first decision must be at k0={K0}")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("decision times must be strictly increasing")
        if times[-1] >= self.horizon:
            raise ValueError("last decision must precede the horizon")

    @classmethod
    def uniform(cls, window: int, L: int) -> "DecisionSchedule":
        return cls(tuple(K0 + window * l for l in range(L)), K0 + window * L)

    @property
    def L(self) -> int:
        return len(self.decision_times)

    def window(self, l: int) -> tuple[int, int]:
        """Half-open step range ``[k^(l), k^(l+1))`` of window ``l`` (0-based)."""
        stop = self.decision_times[l + 1] if l + 1 < self.L else self.horizon
        return self.decision_times[l], stop

    def validate_for(self, specs: Sequence[SensorSpec]):
        if not specs:
            return
        proc = max(s.processed.gen_delay for s in specs)
        for a, b in zip(self.decision_times, self.decision_times[1:]):
            if b - a < proc:
                raise ValueError(
                    f"decisions at {a} and {b} are closer than the processing delay {proc}"
                )


@dataclass(frozen=True)
class HomogeneousDecision:
    window_index: int
    num_processing: int

    def __post_init__(self):
        if self.num_processing < 0:
            raise ValueError("number of processing sensors must be non-negative")


@dataclass(frozen=True, order=True)
class MeasurementEvent:
    sample_time: int
    arrival_time: int
    sensor_id: int
    mode: Mode = field(compare=False)
    noise: NoiseCovariance = field(compare=False, repr=False)


def next_sample_time(current: int, mode: SensingMode) -> int:
    return current + mode.gen_delay


def assign_modes(prev: Sequence[Mode], p: int) -> list[Mode]:
    """Set exactly ``p`` sensors to processing, switching as few as possible.

    Sensors with the lowest ids switch first.
    """
    if not 0 <= p <= len(prev):
        raise ValueError(f"cannot have {p} processing sensors out of {len(prev)}")
    modes = list(prev)
    current = sum(m is Mode.PROCESSED for m in modes)
    if p == current:
        return modes
    src, dst = (Mode.RAW, Mode.PROCESSED) if p > current else (Mode.PROCESSED, Mode.RAW)
    need = abs(p - current)
    for i, m in enumerate(modes):
        if need == 0:
            break
        if m is src:
            modes[i] = dst
            need -= 1
    return modes


@dataclass
class WindowActivity:
    """What happened inside one decision window."""

    events: list[MeasurementEvent]
    switched: list[int]
    discarded: list[tuple[int, int]]  # (sensor id, sample start)


class SensorNetwork:
    """Incremental sampling state of the whole network, advanced window by window.

    Samples whose generation finishes after the current window are kept
    in flight; the next window decides whether they complete or get dropped.
    """

    def __init__(self, specs: Sequence[SensorSpec], horizon: int):
        if [s.id for s in specs] != list(range(len(specs))):
            raise ValueError("sensor ids must be 0..N-1 in order")
        self.specs = list(specs)
        self.horizon = horizon
        self.reset()

    @property
    def N(self) -> int:
        return len(self.specs)

    def reset(self):
        self.modes: list[Mode] = [Mode.RAW] * self.N
        self.in_flight: list[int | None] = [None] * self.N
        self.started = False

    def snapshot(self):
        return (list(self.modes), list(self.in_flight), self.started)

    def restore(self, snap):
        modes, in_flight, started = snap
        self.modes, self.in_flight, self.started = list(modes), list(in_flight), started

    def floor(self) -> int | None:
        """Earliest sample time that may still produce an event."""
        pending = [k for k in self.in_flight if k is not None]
        return min(pending) if pending else None

    def step(self, start: int, stop: int, p: int, final: bool = False) -> WindowActivity:
        """Apply decision ``p`` at ``start`` and sample until ``stop``.

        With ``final=True`` every sample started before the horizon is
        completed, even if its delivery falls after the horizon.
        """
        new_modes = assign_modes(self.modes, p)
        switched = [i for i, (a, b) in enumerate(zip(self.modes, new_modes)) if a is not b]
        events: list[MeasurementEvent] = []
        discarded: list[tuple[int, int]] = []
        for spec in self.specs:
            i = spec.id
            k = self.in_flight[i]
            if not self.started or i in switched:
                if k is not None and k < start:
                    discarded.append((i, k))
                k = start
            mode = spec.mode(new_modes[i])
            self.in_flight[i] = None
            while k < self.horizon:
                done = next_sample_time(k, mode)
                if done > stop and not final:
                    self.in_flight[i] = k
                    break
                events.append(
                    MeasurementEvent(k, done + mode.comm_delay, i, mode.kind, mode.noise)
                )
                k = done
        self.modes = new_modes
        self.started = True
        events.sort()
        return WindowActivity(events, switched, discarded)


def _decision_values(decisions) -> list[int]:
    return [d.num_processing if isinstance(d, HomogeneousDecision) else int(d) for d in decisions]


def simulate_sensor_streams(
    specs: Sequence[SensorSpec],
    schedule: DecisionSchedule,
    decisions: Sequence[HomogeneousDecision | int],
    *,
    activity: list[WindowActivity] | None = None,
) -> list[MeasurementEvent]:
    """All measurement events produced under a homogeneous policy, sorted by sample time.

    Pass a list as ``activity`` to also collect per-window switches and
    discards.
    """
    values = _decision_values(decisions)
    if len(values) != schedule.L:
        raise ValueError(f"expected {schedule.L} decisions, got {len(values)}")
    schedule.validate_for(specs)
    net = SensorNetwork(specs, schedule.horizon)
    events: list[MeasurementEvent] = []
    for l, p in enumerate(values):
        if p > net.N:
            raise ValueError(f"decision {l} asks for {p} processing sensors out of {net.N}")
        start, stop = schedule.window(l)
        act = net.step(start, stop, p, final=l == schedule.L - 1)
        events.extend(act.events)
        if activity is not None:
            activity.append(act)
    events.sort()
    return events
