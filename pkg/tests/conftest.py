import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from procnet.config import ExperimentConfig  # noqa: E402
from procnet.model import NoiseCovariance, SystemModel  # noqa: E402
from procnet.sensing import Mode, MeasurementEvent  # noqa: E402

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def default_config():
    return ExperimentConfig()


@pytest.fixture(scope="session")
def scenario(default_config):
    return default_config.scenario()


def random_spd(rng, n, scale=1.0, floor=0.05):
    M = rng.normal(size=(n, n))
    return scale * (M @ M.T / n + floor * np.eye(n))


def _tame(A, limit=1.02):
    """Scale ``A`` so its spectral radius is at most ``limit``.

    Without this a 100-step horizon can grow covariances to ~1e11, and
    every test then measures floating-point cancellation rather than logic.
    """
    rho = np.max(np.abs(np.linalg.eigvals(A)))
    return A if rho <= limit else A * (limit / rho)


class RandomInstance:
    """A random linear system plus a random bag of delayed measurement events."""

    def __init__(self, seed, n=None, K=None, m=None, max_delay=20, time_varying=None):
        rng = np.random.default_rng(seed)
        self.rng = rng
        self.n = n or int(rng.choice([1, 2, 4]))
        self.K = K if K is not None else int(rng.integers(1, 101))
        m = m if m is not None else int(rng.integers(0, 51))
        tv = bool(rng.integers(2)) if time_varying is None else time_varying
        n = self.n
        r = int(rng.integers(1, n + 1))
        self.H = np.eye(n) if rng.random() < 0.5 else rng.normal(size=(r, n))
        base = _tame(np.eye(n) + 0.05 * rng.normal(size=(n, n)))
        Ws = [random_spd(rng, n, 0.05) for _ in range(3)]
        if tv:
            As = [_tame(base + 0.02 * rng.normal(size=(n, n))) for _ in range(self.K + 1)]
            self.A = lambda k: As[k]
            self.W = lambda k: Ws[k % 3]
            self.model = SystemModel(n, self.A, self.W, random_spd(rng, n, 5.0), self.H)
        else:
            self.model = SystemModel.constant(base, Ws[0], random_spd(rng, n, 5.0), self.H)
            self.A, self.W = self.model.A, self.model.W
        self.P0 = self.model.P0
        noises = [NoiseCovariance(random_spd(rng, self.H.shape[0], s)) for s in (0.5, 2.0, 8.0)]
        self.events = []
        for i in range(m):
            s = int(rng.integers(0, self.K + 1))
            d = int(rng.integers(0, max_delay + 1))
            v = noises[int(rng.integers(len(noises)))]
            self.events.append(MeasurementEvent(s, s + d, i, Mode(int(rng.integers(2))), v))

    def oracle_events(self, events=None):
        return [(e.sample_time, e.arrival_time, e.noise.V) for e in (self.events if events is None else events)]


seeds = st.integers(0, 2**32 - 1)


# -- acceptance reporting -------------------------------------------------------


@pytest.fixture
def acceptance(request):
    """``record(criterion, part, ok, detail)`` for the end-of-run summary."""
    store = request.config.__dict__.setdefault("_acceptance", {})

    def record(criterion, part, ok, detail):
        store.setdefault(criterion, []).append((part, bool(ok), detail))

    return record


def pytest_terminal_summary(terminalreporter, config):
    store = getattr(config, "_acceptance", None)
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(store):
        parts = store[criterion]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{name}: {'pass' if good else 'FAIL'} ({d})" for name, good, d in parts)
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
