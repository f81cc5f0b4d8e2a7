import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_spd
from procnet.model import (
    NoiseCovariance,
    NumericalError,
    SystemModel,
    cwna_block,
    is_psd,
    make_double_integrator_2d,
    predict_cov,
    update_cov,
)


def scalar_model(a, w, P0=1.0):
    return SystemModel.constant([[a]], [[w]], [[P0]])


class TestDoubleIntegrator:
    def test_axis_blocks(self):
        m = make_double_integrator_2d(0.01, 0.1)
        A, W = m.A(0), m.W(0)
        np.testing.assert_array_equal(A[:2, :2], [[1, 0.01], [0, 1]])
        np.testing.assert_array_equal(A[2:, 2:], [[1, 0.01], [0, 1]])
        assert np.all(A[:2, 2:] == 0) and np.all(A[2:, :2] == 0)
        assert W[1, 1] == 0.1 and W[3, 3] == 0.1
        assert W[0, 0] == 0 and W[2, 2] == 0

    def test_deterministic_integrator(self):
        m = make_double_integrator_2d(1.0, 0.0)
        np.testing.assert_array_equal(m.A(0)[:2, :2], [[1, 1], [0, 1]])
        assert not m.W(0).any()

    def test_prediction_from_zero_is_W(self):
        m = make_double_integrator_2d(0.01, 0.1)
        np.testing.assert_array_equal(predict_cov(np.zeros((4, 4)), m, 0, 1), m.W(0))

    def test_time_invariant(self):
        m = make_double_integrator_2d(0.01, 0.1)
        assert np.array_equal(m.A(0), m.A(137)) and np.array_equal(m.W(3), m.W(99))

    @pytest.mark.parametrize("T", [0.0, -0.01])
    def test_rejects_nonpositive_period(self, T):
        with pytest.raises(ValueError):
            make_double_integrator_2d(T, 0.1)

    def test_rejects_negative_noise(self):
        with pytest.raises(ValueError):
            make_double_integrator_2d(0.01, -1.0)

    def test_cwna_and_position_measurements(self):
        m = make_double_integrator_2d(0.01, 0.1, noise_model="cwna", pos_noise_var=0.025, measure="position")
        axis = cwna_block(0.01, 0.1) + np.diag([0.025, 0.0])
        np.testing.assert_allclose(m.W(0)[:2, :2], axis)
        np.testing.assert_allclose(m.W(0)[2:, 2:], axis)
        assert m.meas_dim == 2
        np.testing.assert_array_equal(m.H, [[1, 0, 0, 0], [0, 0, 1, 0]])
        assert is_psd(m.W(0))

    def test_P0_scalar_and_matrix(self):
        assert np.array_equal(make_double_integrator_2d(0.01, 0.1).P0, 10 * np.eye(4))
        P0 = np.diag([1.0, 2, 3, 4])
        assert np.array_equal(make_double_integrator_2d(0.01, 0.1, P0=P0).P0, P0)


class TestPredict:
    def test_identity_dynamics(self):
        m = SystemModel.constant(np.eye(3), np.zeros((3, 3)), np.eye(3))
        P = random_spd(np.random.default_rng(0), 3)
        np.testing.assert_allclose(predict_cov(P, m, 2, 9), P)

    def test_scalar_hand_example(self):
        assert predict_cov(np.array([[1.0]]), scalar_model(2.0, 1.0), 0, 1)[0, 0] == 5.0

    def test_empty_interval_returns_input_object(self):
        P = np.array([[3.0]])
        assert predict_cov(P, scalar_model(2.0, 1.0), 4, 4) is P

    def test_rejects_backwards(self):
        with pytest.raises(ValueError):
            predict_cov(np.eye(1), scalar_model(1.0, 0.0), 5, 4)

    def test_time_varying(self):
        A = lambda k: np.array([[1.0 + k]])
        W = lambda k: np.array([[float(k)]])
        m = SystemModel(1, A, W, np.eye(1))
        # k=0: 1*1*1 + 0 = 1; k=1: 2*1*2 + 1 = 5; k=2: 3*5*3 + 2 = 47
        assert predict_cov(np.eye(1), m, 0, 3)[0, 0] == 47.0

    @given(st.integers(0, 2**31), st.integers(1, 20))
    @settings(max_examples=50)
    def test_trace_nondecreasing_with_identity_A(self, seed, steps):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        m = SystemModel.constant(np.eye(n), random_spd(rng, n, 0.1), np.eye(n))
        P = random_spd(rng, n)
        Q = predict_cov(P, m, 0, steps)
        assert np.trace(Q) >= np.trace(P) - 1e-12
        assert np.max(np.abs(Q - Q.T)) <= 1e-9


class TestUpdate:
    @pytest.mark.parametrize(
        "P, V, expected",
        [
            (np.eye(2), np.eye(2), 0.5 * np.eye(2)),
            (np.array([[10.0]]), np.array([[10.0]]), np.array([[5.0]])),
            (np.array([[10.0]]), np.array([[1.0]]), np.array([[10.0 / 11.0]])),
        ],
    )
    def test_hand_examples(self, P, V, expected):
        np.testing.assert_allclose(update_cov(P, NoiseCovariance(V)), expected, rtol=1e-12)

    def test_singular_prior(self):
        P = np.diag([0.0, 4.0])
        out = update_cov(P, NoiseCovariance(np.eye(2)))
        np.testing.assert_allclose(out, np.diag([0.0, 0.8]))

    def test_partial_observation(self):
        H = np.array([[1.0, 0.0]])
        out = update_cov(np.diag([3.0, 2.0]), NoiseCovariance([[1.0]]), H)
        np.testing.assert_allclose(out, np.diag([0.75, 2.0]))

    def test_ill_conditioned_raises(self):
        with pytest.raises(NumericalError):
            update_cov(np.diag([1e13, 0.0]), np.diag([1.0, 1e-3]))

    @given(st.integers(0, 2**31))
    @settings(max_examples=100)
    def test_loewner_bounds_and_trace_decrease(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        P, V = random_spd(rng, n, 3.0), random_spd(rng, n, 3.0)
        out = update_cov(P, NoiseCovariance(V))
        assert np.trace(out) < np.trace(P)
        assert np.linalg.eigvalsh(P - out).min() >= -1e-10
        assert np.linalg.eigvalsh(V - out).min() >= -1e-10
        assert np.linalg.eigvalsh(out).min() > 0
        np.testing.assert_allclose(out, np.linalg.inv(np.linalg.inv(P) + np.linalg.inv(V)), rtol=1e-8, atol=1e-10)

    @given(st.integers(0, 2**31))
    @settings(max_examples=100)
    def test_commutative(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        P = random_spd(rng, n, 3.0)
        V1, V2 = NoiseCovariance(random_spd(rng, n)), NoiseCovariance(random_spd(rng, n))
        a = update_cov(update_cov(P, V1), V2)
        b = update_cov(update_cov(P, V2), V1)
        np.testing.assert_allclose(a, b, atol=1e-8)


class TestNoiseCovariance:
    @pytest.mark.parametrize("V", [[[1.0, 2.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, -1.0]], [[0.0]], np.ones((2, 3))])
    def test_rejects_invalid(self, V):
        with pytest.raises(ValueError):
            NoiseCovariance(V)

    def test_rejects_ill_conditioned(self):
        with pytest.raises(NumericalError):
            NoiseCovariance(np.diag([1.0, 1e-13]))

    def test_value_semantics(self):
        a, b = NoiseCovariance.isotropic(2.0, 3), NoiseCovariance(2.0 * np.eye(3))
        assert a == b and hash(a) == hash(b) and a.dim == 3
        assert a != NoiseCovariance.isotropic(1.0, 3)
        assert not a.V.flags.writeable

    def test_scalar_input(self):
        assert NoiseCovariance(4.0).V.shape == (1, 1)


def test_system_model_validation():
    with pytest.raises(ValueError):
        SystemModel.constant(np.eye(2), -np.eye(2), np.eye(2))
    with pytest.raises(ValueError):
        SystemModel.constant(np.eye(2), np.eye(2), -np.eye(2))
    with pytest.raises(ValueError):
        SystemModel.constant(np.eye(2), np.eye(2), np.eye(2), H=np.eye(3))
