"""Pure-Python covariance kernel (fallback for ``_ckernel``)."""
from __future__ import annotations

import numpy as np

from .model import COND_LIMIT, NumericalError


def _predict(P, A, W):
    P = A @ P @ A.T + W
    return 0.5 * (P + P.T)


def _update(P, H, V, full_state):
    PHt = P if full_state else P @ H.T
    S = V + (PHt if full_state else H @ PHt)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise NumericalError("innovation covariance is not positive definite") from None
    d = np.diag(L)
    if (d.max() / d.min()) ** 2 > COND_LIMIT:
        raise NumericalError("innovation covariance is singular beyond tolerance")
    P = P - PHt @ np.linalg.solve(S, PHt.T)
    return 0.5 * (P + P.T)


def advance(A, W, H, vtab, G_c, c, ev_sample, ev_arrival, ev_vidx, q0, q1, floor):
    """Covariances ``P_k`` for ``q0 <= k < q1`` from a checkpoint at step ``c``.

    ``G_c`` is the prior at ``c``: every measurement sampled before ``c`` is
    already folded in and every measurement in ``ev_*`` (sorted by sample
    time, all ``>= c``) is not. ``P_k`` only uses measurements with
    ``arrival <= k``. A late arrival rolls the recursion back to its sample
    time and recomputes forward.

    Returns ``(Ps, c_new, G_new)``: the covariances, and a new checkpoint that
    stays valid as long as later events are sampled at or after ``floor``.
    """
    n = G_c.shape[0]
    m = len(ev_sample)
    full_state = H.shape[0] == n and np.array_equal(H, np.eye(n))
    tv_A, tv_W = A.shape[0] > 1, W.shape[0] > 1
    if m and ev_sample[0] < c:
        raise ValueError("event sampled before the checkpoint")
    if q0 < c or q1 <= q0:
        raise ValueError("invalid query range")

    F = np.empty((q1 - c, n, n))
    out = np.empty((q1 - q0, n, n))
    by_arrival = np.argsort(ev_arrival, kind="stable")
    included = np.zeros(m, dtype=bool)
    bucket_lo = np.searchsorted(ev_sample, np.arange(c, q1), side="left")
    bucket_hi = np.searchsorted(ev_sample, np.arange(c, q1), side="right")
    ptr = 0
    f_valid = c - 1
    for k in range(q0, q1):
        while ptr < m and ev_arrival[by_arrival[ptr]] <= k:
            e = by_arrival[ptr]
            included[e] = True
            f_valid = min(f_valid, ev_sample[e] - 1)
            ptr += 1
        for t in range(f_valid + 1, k + 1):
            i = t - c
            if t == c:
                G = G_c
            else:
                G = _predict(F[i - 1], A[i - 1 if tv_A else 0], W[i - 1 if tv_W else 0])
            for e in range(bucket_lo[i], bucket_hi[i]):
                if included[e]:
                    G = _update(G, H, vtab[ev_vidx[e]], full_state)
            F[i] = G
        f_valid = max(f_valid, k)
        out[k - q0] = F[k - c]

    c_new = min(q1, floor)
    for e in range(m):
        if ev_arrival[e] >= q1:
            c_new = min(c_new, int(ev_sample[e]))
    if c_new == c:
        G_new = np.array(G_c, copy=True)
    else:
        i = c_new - 1 - c
        G_new = _predict(F[i], A[i if tv_A else 0], W[i if tv_W else 0])
    return out, c_new, G_new
