"""Kalman predictor covariance with delayed and out-of-sequence measurements.

A measurement updates the covariance at its *sample* time, but only once it
has *arrived*: ``P_k`` uses exactly the measurements with ``arrival <= k``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernel
from .model import K0, NoiseCovariance, SystemModel, predict_cov, update_cov
from .sensing import MeasurementEvent


@dataclass(frozen=True)
class EventLog:
    events: tuple[MeasurementEvent, ...]
    model: SystemModel

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(sorted(self.events)))

    def delivered(self, k: int) -> list[MeasurementEvent]:
        return [e for e in self.events if e.arrival_time <= k]


@dataclass(frozen=True)
class CovarianceTrace:
    """``P_k`` and ``tr(P_k)`` for ``k = start .. start + len - 1``."""

    start: int
    covariances: np.ndarray
    traces: np.ndarray

    @classmethod
    def from_covariances(cls, start: int, Ps: np.ndarray) -> "CovarianceTrace":
        return cls(start, Ps, np.trace(Ps, axis1=1, axis2=2).copy())

    @property
    def steps(self) -> np.ndarray:
        return np.arange(self.start, self.start + len(self.traces))

    def __len__(self):
        return len(self.traces)

    def at(self, k: int) -> float:
        return float(self.traces[k - self.start])


def covariance_at(log: EventLog, k: int, P0: np.ndarray | None = None) -> np.ndarray:
    """``P_k`` recomputed from scratch over the measurements delivered by ``k``."""
    if k < K0:
        raise ValueError(f"query time {k} precedes k0={K0}")
    model = log.model
    P = model.P0 if P0 is None else np.asarray(P0, dtype=float)
    t = K0
    for ev in log.delivered(k):
        P = predict_cov(P, model, t, ev.sample_time)
        t = ev.sample_time
        P = update_cov(P, ev.noise, model.H)
    return predict_cov(P, model, t, k)


class NoiseTable:
    """Interns noise covariances into a dense array for the kernel."""

    def __init__(self, noises: Iterable[NoiseCovariance] = ()):
        self._index: dict[NoiseCovariance, int] = {}
        self._mats: list[np.ndarray] = []
        for v in noises:
            self.index(v)

    def index(self, v: NoiseCovariance) -> int:
        i = self._index.get(v)
        if i is None:
            i = self._index[v] = len(self._mats)
            self._mats.append(v.V)
        return i

    def array(self, dim: int) -> np.ndarray:
        if not self._mats:
            return np.zeros((1, dim, dim))
        return np.stack(self._mats)


def _event_arrays(events: Sequence[MeasurementEvent], table: NoiseTable):
    m = len(events)
    sample = np.fromiter((e.sample_time for e in events), dtype=np.int64, count=m)
    arrival = np.fromiter((e.arrival_time for e in events), dtype=np.int64, count=m)
    vidx = np.fromiter((table.index(e.noise) for e in events), dtype=np.int64, count=m)
    return sample, arrival, vidx


def run_trace(
    events: Sequence[MeasurementEvent],
    model: SystemModel,
    K: int,
    *,
    advance=None,
) -> CovarianceTrace:
    """``P_k`` for every ``k = k0 .. K`` in one incremental pass.

    ``advance`` overrides the kernel (defaults to the compiled one when built).
    """
    if K < K0:
        raise ValueError(f"horizon {K} precedes k0={K0}")
    advance = advance or kernel.advance
    events = sorted(events)
    table = NoiseTable()
    sample, arrival, vidx = _event_arrays(events, table)
    Ps, _, _ = advance(
        model.A_seq(K0, K + 1),
        model.W_seq(K0, K + 1),
        model.H,
        table.array(model.meas_dim),
        model.P0,
        K0,
        sample,
        arrival,
        vidx,
        K0,
        K + 1,
        K + 1,
    )
    return CovarianceTrace.from_covariances(K0, Ps)


class DelayedPredictor:
    """Stateful covariance predictor fed with events as they become known.

    Keeps a single checkpoint: the prior at step ``c`` with every measurement
    sampled before ``c`` folded in. Events sampled at or after ``c`` stay
    pending so late arrivals can be replayed on top of it.
    """

    def __init__(self, model: SystemModel, noises: Iterable[NoiseCovariance] = (), advance=None):
        self.model = model
        self.table = NoiseTable(noises)
        self._advance = advance or kernel.advance
        self._vtab = self.table.array(model.meas_dim)
        self.reset()

    def reset(self):
        self.c = K0
        self.G = np.array(self.model.P0, dtype=float)
        self.pending: list[MeasurementEvent] = []

    def snapshot(self):
        return (self.c, self.G, list(self.pending))

    def restore(self, snap):
        self.c, self.G, pending = snap
        self.pending = list(pending)

    def add(self, events: Iterable[MeasurementEvent]):
        events = list(events)
        if any(e.sample_time < self.c for e in events):
            raise ValueError("event sampled before the current checkpoint")
        n_before = len(self.table._mats)
        self.pending.extend(events)
        self.pending.sort()
        for e in events:
            self.table.index(e.noise)
        if len(self.table._mats) != n_before:
            self._vtab = self.table.array(self.model.meas_dim)

    def advance(self, q0: int, q1: int, floor: int | None = None) -> np.ndarray:
        """Covariances for ``q0 <= k < q1``.

        ``floor`` is the earliest sample time of any event that may still be
        added later; ``None`` means no earlier event can appear.
        """
        floor = q1 if floor is None else floor
        sample, arrival, vidx = _event_arrays(self.pending, self.table)
        Ps, c_new, G_new = self._advance(
            self.model.A_seq(self.c, q1),
            self.model.W_seq(self.c, q1),
            self.model.H,
            self._vtab,
            self.G,
            self.c,
            sample,
            arrival,
            vidx,
            q0,
            q1,
            floor,
        )
        self.c, self.G = c_new, G_new
        self.pending = [e for e in self.pending if e.sample_time >= c_new]
        return Ps
