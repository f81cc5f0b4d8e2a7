"""Linear dynamics, noise statistics and the two covariance maps.

Time is indexed by integer steps ``k``; step ``k`` stands for ``k * T``
seconds. The package uses ``k0 = 0`` as the first instant everywhere
(schedules, traces, CSV output).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

K0 = 0

#: Guard on the condition number of matrices that get inverted.
COND_LIMIT = 1e12

_PSD_TOL = 1e-10


class NumericalError(ArithmeticError):
    """Raised when a covariance operation would return garbage."""


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def is_psd(P: np.ndarray, tol: float = _PSD_TOL) -> bool:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        return False
    if not np.allclose(P, P.T, atol=1e-9, rtol=0.0):
        return False
    return bool(np.linalg.eigvalsh(symmetrize(P)).min() >= -tol)


@dataclass(frozen=True, eq=False)
class NoiseCovariance:
    """Symmetric positive-definite measurement-noise covariance ``V``."""

    V: np.ndarray

    def __post_init__(self):
        V = np.array(self.V, dtype=float, copy=True)
        if V.ndim == 0:
            V = V.reshape(1, 1)
        if V.ndim != 2 or V.shape[0] != V.shape[1]:
            raise ValueError(f"noise covariance must be square, got shape {V.shape}")
        if not np.allclose(V, V.T, atol=1e-9, rtol=0.0):
            raise ValueError("noise covariance must be symmetric")
        eig = np.linalg.eigvalsh(symmetrize(V))
        if eig.min() <= 0:
            raise ValueError("noise covariance must be positive definite")
        if eig.max() / eig.min() > COND_LIMIT:
            raise NumericalError("noise covariance is too ill-conditioned to invert")
        V = symmetrize(V)
        V.setflags(write=False)
        object.__setattr__(self, "V", V)

    @classmethod
    def isotropic(cls, variance: float, dim: int) -> "NoiseCovariance":
        return cls(variance * np.eye(dim))

    @property
    def dim(self) -> int:
        return self.V.shape[0]

    def __eq__(self, other):
        if not isinstance(other, NoiseCovariance):
            return NotImplemented
        return self.V.shape == other.V.shape and bool(np.array_equal(self.V, other.V))

    def __hash__(self):
        return hash((self.V.shape, self.V.tobytes()))


MatrixFn = Callable[[int], np.ndarray]


class ConstantMatrix:
    """Picklable ``k -> M`` for time-invariant models."""

    def __init__(self, M: np.ndarray):
        self.M = M

    def __call__(self, k: int) -> np.ndarray:
        return self.M


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Time-varying linear system ``x[k+1] = A_k x[k] + w_k``, ``w_k ~ N(0, W_k)``.

    ``A`` and ``W`` are callables of the step index. ``H`` is the matrix
    the sensors observe (``y = H x + v``); it defaults to the identity,
    i.e. sensors sample the whole state.
    """

    n: int
    A: MatrixFn
    W: MatrixFn
    P0: np.ndarray
    H: np.ndarray | None = None
    time_invariant: bool = field(default=False, compare=False)

    def __post_init__(self):
        P0 = np.asarray(self.P0, dtype=float)
        if P0.shape != (self.n, self.n):
            raise ValueError(f"P0 must be {self.n}x{self.n}")
        if not is_psd(P0):
            raise ValueError("P0 must be symmetric positive semidefinite")
        object.__setattr__(self, "P0", P0)
        H = np.eye(self.n) if self.H is None else np.atleast_2d(np.asarray(self.H, dtype=float))
        if H.shape[1] != self.n:
            raise ValueError(f"H must have {self.n} columns")
        object.__setattr__(self, "H", H)

    @classmethod
    def constant(cls, A, W, P0, H=None) -> "SystemModel":
        A = np.array(A, dtype=float)
        W = np.array(W, dtype=float)
        if not is_psd(W):
            raise ValueError("W must be symmetric positive semidefinite")
        A.setflags(write=False)
        W.setflags(write=False)
        return cls(A.shape[0], ConstantMatrix(A), ConstantMatrix(W), P0, H, time_invariant=True)

    @property
    def meas_dim(self) -> int:
        return self.H.shape[0]

    def A_seq(self, start: int, stop: int) -> np.ndarray:
        """Stack ``A_k`` for ``start <= k < stop`` (a single matrix if time-invariant)."""
        if self.time_invariant:
            return np.asarray(self.A(start), dtype=float)[None]
        return np.stack([np.asarray(self.A(k), dtype=float) for k in range(start, max(stop, start + 1))])

    def W_seq(self, start: int, stop: int) -> np.ndarray:
        if self.time_invariant:
            return np.asarray(self.W(start), dtype=float)[None]
        return np.stack([np.asarray(self.W(k), dtype=float) for k in range(start, max(stop, start + 1))])


def cwna_block(T: float, intensity: float) -> np.ndarray:
    """Exact discretization of continuous white-noise acceleration for one axis."""
    return intensity * np.array([[T**3 / 3.0, T**2 / 2.0], [T**2 / 2.0, T]])


def make_double_integrator_2d(
    T: float,
    vel_noise_var: float,
    *,
    P0: float | np.ndarray = 10.0,
    noise_model: str = "velocity",
    pos_noise_var: float = 0.0,
    measure: str = "full",
) -> SystemModel:
    """Planar stochastically forced double integrator, state ``(px, vx, py, vy)``.

    Parameters
    ----------
    T : float
        Sampling period in seconds.
    vel_noise_var : float
        With ``noise_model="velocity"`` this is the per-step variance added to
        each velocity coordinate. With ``noise_model="cwna"`` it is the
        continuous-time acceleration intensity (variance per second), so the
        per-step velocity variance is ``vel_noise_var * T``.
    P0 : float or ndarray
        Initial error covariance, a scalar multiplier of the identity or a
        full 4x4 matrix.
    noise_model : {"velocity", "cwna"}
    pos_noise_var : float
        Extra per-step variance on each position coordinate.
    measure : {"full", "position"}
        Whether sensors observe the whole state or the two positions.
    """
    if T <= 0:
        raise ValueError(f"sampling period must be positive, got {T}")
    if vel_noise_var < 0 or pos_noise_var < 0:
        raise ValueError("noise variances must be non-negative")
    axis_A = np.array([[1.0, T], [0.0, 1.0]])
    if noise_model == "velocity":
        axis_W = np.diag([0.0, vel_noise_var])
    elif noise_model == "cwna":
        axis_W = cwna_block(T, vel_noise_var)
    else:
        raise ValueError(f"unknown noise model {noise_model!r}")
    axis_W = axis_W + np.diag([pos_noise_var, 0.0])
    A = np.kron(np.eye(2), axis_A)
    W = np.kron(np.eye(2), axis_W)
    P0 = P0 * np.eye(4) if np.isscalar(P0) else np.asarray(P0, dtype=float)
    if measure == "full":
        H = None
    elif measure == "position":
        H = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])
    else:
        raise ValueError(f"unknown measurement model {measure!r}")
    return SystemModel.constant(A, W, P0, H)


def predict_cov(P: np.ndarray, model: SystemModel, start: int, stop: int) -> np.ndarray:
    """Open-loop propagation ``P -> A_k P A_k^T + W_k`` for ``k = start .. stop-1``.

    Returns ``P`` itself (same object) when ``start == stop``.
    """
    if start > stop:
        raise ValueError(f"cannot predict backwards from {start} to {stop}")
    if start == stop:
        return P
    for k in range(start, stop):
        A = model.A(k)
        P = symmetrize(A @ P @ A.T + model.W(k))
    return P


def update_cov(P: np.ndarray, V, H: np.ndarray | None = None) -> np.ndarray:
    """Fuse one measurement with noise covariance ``V`` into ``P``.

    Equivalent to ``(P^-1 + H^T V^-1 H)^-1`` but evaluated as
    ``P - P H^T (H P H^T + V)^-1 H P`` so singular ``P`` is fine.
    """
    V = V.V if isinstance(V, NoiseCovariance) else np.atleast_2d(np.asarray(V, dtype=float))
    P = np.asarray(P, dtype=float)
    PHt = P if H is None else P @ H.T
    S = V + (PHt if H is None else H @ PHt)
    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > COND_LIMIT:
        raise NumericalError("innovation covariance is singular beyond tolerance")
    return symmetrize(P - PHt @ np.linalg.solve(S, PHt.T))
