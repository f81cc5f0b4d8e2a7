import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import unroll_sensor
from procnet.model import NoiseCovariance
from procnet.sensing import (
    DecisionSchedule,
    HomogeneousDecision,
    Mode,
    SensingMode,
    SensorNetwork,
    SensorSpec,
    assign_modes,
    homogeneous_sensors,
    next_sample_time,
    simulate_sensor_streams,
)

R, P = Mode.RAW, Mode.PROCESSED

RAW = SensingMode(R, 4, 1, NoiseCovariance.isotropic(10.0, 4))
PROC = SensingMode(P, 14, 1, NoiseCovariance.isotropic(1.0, 4))


def sensors(N, raw=RAW, proc=PROC):
    return homogeneous_sensors(N, raw, proc)


def streams(N, decisions, window=50, activity=None):
    sched = DecisionSchedule.uniform(window, len(decisions))
    return simulate_sensor_streams(sensors(N), sched, decisions, activity=activity)


class TestNextSample:
    @pytest.mark.parametrize("k, mode, expected", [(0, RAW, 4), (0, PROC, 14), (7, RAW, 11)])
    def test_examples(self, k, mode, expected):
        assert next_sample_time(k, mode) == expected


class TestStreams:
    def test_single_raw_window(self):
        ev = streams(1, [0])
        assert [e.sample_time for e in ev] == list(range(0, 50, 4))
        assert [e.arrival_time for e in ev] == list(range(5, 54, 4))
        assert all(e.mode is R for e in ev)

    def test_unchanged_mode_carries_over(self):
        act = []
        ev = streams(1, [1, 1], activity=act)
        assert act[1].discarded == [] and act[1].switched == []
        e42 = [e for e in ev if e.sample_time == 42]
        assert len(e42) == 1 and e42[0].arrival_time == 56 + 1
        assert [e.sample_time for e in ev] == list(range(0, 100, 14))

    def test_switch_discards_in_flight_sample(self):
        act = []
        ev = streams(1, [1, 0], activity=act)
        assert act[1].discarded == [(0, 42)]
        assert act[1].switched == [0]
        assert 42 not in [e.sample_time for e in ev]
        raw = [e.sample_time for e in ev if e.mode is R]
        assert raw[0] == 50 and raw == list(range(50, 100, 4))

    def test_completion_at_boundary_is_kept(self):
        # processed samples at 0, 14, 28: the third would finish at 42; use window 42
        act = []
        ev = streams(1, [1, 0], window=42, activity=act)
        assert act[1].discarded == []
        assert 28 in [e.sample_time for e in ev if e.mode is P]

    def test_transmitting_sample_survives_switch(self):
        # sample at 36 finishes generating at 50 (= boundary) and is already on the channel
        raw = SensingMode(R, 4, 1, NoiseCovariance.isotropic(10.0, 1))
        proc = SensingMode(P, 12, 1, NoiseCovariance.isotropic(1.0, 1))
        sched = DecisionSchedule.uniform(48, 2)
        act = []
        ev = simulate_sensor_streams(homogeneous_sensors(1, raw, proc), sched, [1, 0], activity=act)
        assert act[1].discarded == []
        assert (36, 49) in [(e.sample_time, e.arrival_time) for e in ev]

    def test_samples_stop_at_horizon(self):
        ev = streams(2, [0, 1, 2])
        assert max(e.sample_time for e in ev) < 150
        # the last processed samples are generated past K but still reported
        assert max(e.arrival_time for e in ev) > 150

    def test_rejects_bad_inputs(self):
        sched = DecisionSchedule.uniform(50, 2)
        with pytest.raises(ValueError):
            simulate_sensor_streams(sensors(2), sched, [0])
        with pytest.raises(ValueError):
            simulate_sensor_streams(sensors(2), sched, [0, 3])

    def test_accepts_decision_objects(self):
        a = streams(3, [HomogeneousDecision(0, 2), HomogeneousDecision(1, 1)])
        b = streams(3, [2, 1])
        assert a == b


class TestAssignModes:
    @pytest.mark.parametrize(
        "prev, p, expected",
        [
            ([P, P, R, R], 3, [P, P, P, R]),
            ([P, P, R, R], 2, [P, P, R, R]),
            ([R, R, R, R], 4, [P, P, P, P]),
            ([R, P, R, P], 0, [R, R, R, R]),
            ([R, P, R, P], 1, [R, R, R, P]),
        ],
    )
    def test_examples(self, prev, p, expected):
        assert assign_modes(prev, p) == expected

    @given(st.lists(st.sampled_from([R, P]), min_size=1, max_size=8), st.data())
    def test_minimal_change(self, prev, data):
        p = data.draw(st.integers(0, len(prev)))
        out = assign_modes(prev, p)
        assert sum(m is P for m in out) == p
        changed = sum(a is not b for a, b in zip(prev, out))
        assert changed == abs(p - sum(m is P for m in prev))

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            assign_modes([R, R], 3)


@given(st.integers(1, 5), st.lists(st.integers(0, 5), min_size=1, max_size=6))
@settings(max_examples=60)
def test_stream_invariants(N, raw_decisions):
    decisions = [min(d, N) for d in raw_decisions]
    act = []
    ev = streams(N, decisions, activity=act)
    for e in ev:
        assert e.arrival_time - e.sample_time == (RAW if e.mode is R else PROC).rec_delay
    prev = 0
    for l, (a, p) in enumerate(zip(act, decisions)):
        assert len(a.switched) == abs(p - prev)
        prev = p
    # consecutive samples of one sensor inside a window are one generation delay apart
    for i in range(N):
        mine = [e for e in ev if e.sensor_id == i]
        for x, y in zip(mine, mine[1:]):
            if x.mode is y.mode and y.sample_time % 50 != 0:
                assert y.sample_time - x.sample_time == (RAW if x.mode is R else PROC).gen_delay
    assert ev == streams(N, decisions)


@pytest.mark.parametrize("a", range(5))
def test_static_policies_never_discard(a):
    act = []
    ev = streams(4, [a] * 10, activity=act)
    assert sum(len(x.discarded) for x in act) == 0
    # and match plain back-to-back sampling per sensor
    for i in range(4):
        mode = PROC if i < a else RAW
        got = [(e.sample_time, e.arrival_time) for e in ev if e.sensor_id == i]
        want = unroll_sensor(0, 500 + mode.gen_delay, mode.gen_delay, mode.comm_delay)
        want = [w for w in want if w[0] < 500]
        assert got == want


class TestSpecs:
    def test_tradeoff_enforced(self):
        with pytest.raises(ValueError):
            SensorSpec(0, RAW, SensingMode(P, 3, 1, PROC.noise))
        with pytest.raises(ValueError):
            SensorSpec(0, RAW, SensingMode(P, 14, 1, NoiseCovariance.isotropic(20.0, 4)))
        with pytest.raises(ValueError):
            SensorSpec(0, RAW, SensingMode(P, 14, 2, PROC.noise))
        with pytest.raises(ValueError):
            SensorSpec(0, PROC, RAW)

    @pytest.mark.parametrize("g, c", [(0, 1), (1, 0)])
    def test_mode_delays_positive(self, g, c):
        with pytest.raises(ValueError):
            SensingMode(R, g, c, RAW.noise)

    def test_rec_delay(self):
        assert RAW.rec_delay == 5 and PROC.rec_delay == 15


class TestSchedule:
    def test_uniform(self):
        s = DecisionSchedule.uniform(50, 10)
        assert s.decision_times[0] == 0 and s.horizon == 500 and s.L == 10
        assert s.window(0) == (0, 50) and s.window(9) == (450, 500)

    def test_spacing_checked_against_processing_delay(self):
        with pytest.raises(ValueError):
            DecisionSchedule.uniform(10, 3).validate_for(sensors(1))

    @pytest.mark.parametrize("times, K", [((1, 50), 100), ((0, 50, 40), 100), ((0, 50), 50), ((), 10)])
    def test_rejects_malformed(self, times, K):
        with pytest.raises(ValueError):
            DecisionSchedule(times, K)


def test_network_snapshot_roundtrip():
    net = SensorNetwork(sensors(2), 100)
    net.step(0, 50, 1)
    snap = net.snapshot()
    a = net.step(50, 100, 0, final=True)
    net.restore(snap)
    b = net.step(50, 100, 0, final=True)
    assert a.events == b.events and a.discarded == b.discarded
    assert np.all([x is y for x, y in zip(net.modes, [R, R])])
