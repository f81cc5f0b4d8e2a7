# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled covariance kernel. Same contract as ``_pykernel.advance``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt
from libc.stdlib cimport malloc, free

from .model import COND_LIMIT, NumericalError

cnp.import_array()


cdef inline void _predict(const double* P, const double* A, const double* W,
                          double* out, double* tmp, int n) noexcept nogil:
    cdef int i, j, l
    cdef double s
    for i in range(n):
        for j in range(n):
            s = 0.0
            for l in range(n):
                s += A[i * n + l] * P[l * n + j]
            tmp[i * n + j] = s
    for i in range(n):
        for j in range(i, n):
            s = 0.0
            for l in range(n):
                s += tmp[i * n + l] * A[j * n + l]
            out[i * n + j] = s + 0.5 * (W[i * n + j] + W[j * n + i])
    for i in range(n):
        for j in range(i):
            out[i * n + j] = out[j * n + i]


cdef inline int _update(double* P, const double* H, const double* V, int n, int r,
                        bint full_state, double cond_limit,
                        double* PHt, double* S, double* X) noexcept nogil:
    """In-place ``P -= P H^T (H P H^T + V)^-1 H P``. Returns 0, or 1 on failure."""
    cdef int i, j, l
    cdef double s, dmin, dmax
    # PHt is n x r
    if full_state:
        for i in range(n * n):
            PHt[i] = P[i]
    else:
        for i in range(n):
            for j in range(r):
                s = 0.0
                for l in range(n):
                    s += P[i * n + l] * H[j * n + l]
                PHt[i * r + j] = s
    # S = H PHt + V, r x r
    for i in range(r):
        for j in range(r):
            if full_state:
                s = PHt[i * r + j]
            else:
                s = 0.0
                for l in range(n):
                    s += H[i * n + l] * PHt[l * r + j]
            S[i * r + j] = s + V[i * r + j]
    # Cholesky in place (lower triangle)
    dmin = 1e300
    dmax = 0.0
    for j in range(r):
        s = S[j * r + j]
        for l in range(j):
            s -= S[j * r + l] * S[j * r + l]
        if not (s > 0.0):
            return 1
        s = sqrt(s)
        S[j * r + j] = s
        if s < dmin:
            dmin = s
        if s > dmax:
            dmax = s
        for i in range(j + 1, r):
            s = S[i * r + j]
            for l in range(j):
                s -= S[i * r + l] * S[j * r + l]
            S[i * r + j] = s / S[j * r + j]
    if (dmax / dmin) * (dmax / dmin) > cond_limit:
        return 1
    # X = S^-1 (PHt)^T, r x n: forward then backward substitution per column
    for j in range(n):
        for i in range(r):
            s = PHt[j * r + i]
            for l in range(i):
                s -= S[i * r + l] * X[l * n + j]
            X[i * n + j] = s / S[i * r + i]
        for i in range(r - 1, -1, -1):
            s = X[i * n + j]
            for l in range(i + 1, r):
                s -= S[l * r + i] * X[l * n + j]
            X[i * n + j] = s / S[i * r + i]
    for i in range(n):
        for j in range(i, n):
            s = 0.0
            for l in range(r):
                s += PHt[i * r + l] * X[l * n + j]
            P[i * n + j] = 0.5 * (P[i * n + j] + P[j * n + i]) - s
    for i in range(n):
        for j in range(i):
            P[i * n + j] = P[j * n + i]
    return 0


def advance(A, W, H, vtab, G_c, long c, ev_sample, ev_arrival, ev_vidx,
            long q0, long q1, long floor):
    cdef cnp.ndarray[double, ndim=3, mode="c"] A_ = np.ascontiguousarray(A, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=3, mode="c"] W_ = np.ascontiguousarray(W, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] H_ = np.ascontiguousarray(H, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=3, mode="c"] V_ = np.ascontiguousarray(vtab, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] Gc = np.ascontiguousarray(G_c, dtype=np.float64)
    cdef cnp.ndarray[long, ndim=1, mode="c"] smp = np.ascontiguousarray(ev_sample, dtype=np.int64)
    cdef cnp.ndarray[long, ndim=1, mode="c"] arr = np.ascontiguousarray(ev_arrival, dtype=np.int64)
    cdef cnp.ndarray[long, ndim=1, mode="c"] vix = np.ascontiguousarray(ev_vidx, dtype=np.int64)
    cdef int n = Gc.shape[0]
    cdef int r = H_.shape[0]
    cdef long m = smp.shape[0]
    cdef long span = q1 - c
    cdef bint tv_A = A_.shape[0] > 1
    cdef bint tv_W = W_.shape[0] > 1
    cdef bint full_state = r == n and np.array_equal(H_, np.eye(n))
    cdef double cond_limit = COND_LIMIT
    if m and smp[0] < c:
        raise ValueError("event sampled before the checkpoint")
    if q0 < c or q1 <= q0:
        raise ValueError("invalid query range")

    cdef cnp.ndarray[double, ndim=3, mode="c"] F = np.empty((span, n, n))
    cdef cnp.ndarray[double, ndim=3, mode="c"] out = np.empty((q1 - q0, n, n))
    cdef cnp.ndarray[long, ndim=1, mode="c"] by_arr = np.argsort(arr, kind="stable").astype(np.int64)
    cdef cnp.ndarray[long, ndim=1, mode="c"] lo = np.searchsorted(smp, np.arange(c, q1), side="left").astype(np.int64)
    cdef cnp.ndarray[long, ndim=1, mode="c"] hi = np.searchsorted(smp, np.arange(c, q1), side="right").astype(np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1, mode="c"] inc = np.zeros(m, dtype=np.uint8)
    cdef cnp.ndarray[double, ndim=2, mode="c"] G_new = np.empty((n, n))

    cdef double* work = <double*> malloc(sizeof(double) * (3 * n * n + 2 * n * r + r * r + 8))
    if work == NULL:
        raise MemoryError()
    cdef double* tmp = work
    cdef double* PHt = work + n * n
    cdef double* S = PHt + n * (r if r > n else n)
    cdef double* X = S + r * r
    cdef double* Fp = &F[0, 0, 0]
    cdef double* cur
    cdef long k, t, i, e, ptr = 0, f_valid = c - 1, nn = n * n, c_new
    cdef int err = 0
    try:
        with nogil:
            for k in range(q0, q1):
                while ptr < m and arr[by_arr[ptr]] <= k:
                    e = by_arr[ptr]
                    inc[e] = 1
                    if smp[e] - 1 < f_valid:
                        f_valid = smp[e] - 1
                    ptr += 1
                for t in range(f_valid + 1, k + 1):
                    i = t - c
                    cur = Fp + i * nn
                    if t == c:
                        for e in range(nn):
                            cur[e] = (&Gc[0, 0])[e]
                    else:
                        _predict(cur - nn, &A_[i - 1 if tv_A else 0, 0, 0],
                                 &W_[i - 1 if tv_W else 0, 0, 0], cur, tmp, n)
                    for e in range(lo[i], hi[i]):
                        if inc[e]:
                            err = _update(cur, &H_[0, 0], &V_[vix[e], 0, 0], n, r,
                                          full_state, cond_limit, PHt, S, X)
                            if err:
                                break
                    if err:
                        break
                if err:
                    break
                if k > f_valid:
                    f_valid = k
                for e in range(nn):
                    (&out[k - q0, 0, 0])[e] = Fp[(k - c) * nn + e]
            if not err:
                c_new = q1
                if floor < c_new:
                    c_new = floor
                for e in range(m):
                    if arr[e] >= q1 and smp[e] < c_new:
                        c_new = smp[e]
                if c_new == c:
                    for e in range(nn):
                        (&G_new[0, 0])[e] = (&Gc[0, 0])[e]
                else:
                    i = c_new - 1 - c
                    _predict(Fp + i * nn, &A_[i if tv_A else 0, 0, 0],
                             &W_[i if tv_W else 0, 0, 0], &G_new[0, 0], tmp, n)
    finally:
        free(work)
    if err:
        raise NumericalError("innovation covariance is singular beyond tolerance")
    return out, int(c_new), G_new
