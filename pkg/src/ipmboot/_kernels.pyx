# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled damped Gauss-Newton loop for reciprocal-linear mean functions.

The mean is ``1 / (G theta)`` for a fixed basis matrix ``G``.  The loop mirrors
``ipmboot.gauss_newton.gn_loop`` step for step, including the LAPACK routine
used for the linear least-squares step (``dgelss``).
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport fabs, INFINITY
from libc.stdlib cimport malloc, free
from scipy.linalg.cython_lapack cimport dgelss

cnp.import_array()

cdef double JAC_CONDITION = 1e12
cdef double THETA_FLOOR = 1e-8
cdef double DBL_EPS = 2.220446049250313e-16

cdef enum:
    PARAM = 0
    SSE = 1
    MAX_ITER = 2
    SINGULAR = 3
    DAMPING = 4
    BAD_START = 5


cdef int _lwork(int n, int p) noexcept nogil:
    cdef int m = n if n > p else p
    cdef int mn = n if n < p else p
    cdef int a = 2 * mn
    if m > a:
        a = m
    return 3 * mn + a + 64


cdef inline int _evaluate(const double* G, const double* theta, const double* y,
                          int n, int p, double phi_min,
                          double* phi, double* r, double* S) noexcept nogil:
    """phi = G theta, r = y - 1/phi, S = r'r.  Returns 0 where phi is too small."""
    cdef int i, k
    cdef double acc, f, s = 0.0
    for i in range(n):
        acc = 0.0
        for k in range(p):
            acc = acc + G[i * p + k] * theta[k]
        if not fabs(acc) > phi_min:
            return 0
        phi[i] = acc
        f = 1.0 / acc
        r[i] = y[i] - f
    for i in range(n):
        s = s + r[i] * r[i]
    S[0] = s
    return 1


cdef inline double _rel(const double* step, const double* theta, int p) noexcept nogil:
    cdef int k
    cdef double d, m = 0.0, v
    for k in range(p):
        d = fabs(theta[k])
        if d < THETA_FLOOR:
            d = THETA_FLOOR
        v = fabs(step[k]) / d
        if v > m:
            m = v
    return m


cdef int _fit_one(const double* G, const double* y, int n, int p, double* theta,
                  double delta, double sse_tol, int max_iter, int max_halv,
                  double phi_min, double* trace, int* n_trace, int* iters,
                  double* ws, int lwork) noexcept nogil:
    cdef int ldb = n if n > p else p
    cdef double* J = ws
    cdef double* rhs = J + n * p
    cdef double* sv = rhs + ldb
    cdef double* phi = sv + p
    cdef double* r = phi + n
    cdef double* rc = r + n
    cdef double* phic = rc + n
    cdef double* cand = phic + n
    cdef double* step = cand + p
    cdef double* moved = step + p
    cdef double* work = moved + p
    cdef int i, k, h, it = 0, status = MAX_ITER, accepted, rank, info, nrhs = 1
    cdef int mm = n, nn = p
    cdef double S, Sc, S_old, lam, cond, rcond = DBL_EPS, inv2, predicted

    n_trace[0] = 0
    iters[0] = 0
    if not _evaluate(G, theta, y, n, p, phi_min, phi, r, &S):
        return BAD_START
    trace[0] = S
    n_trace[0] = 1
    while it < max_iter:
        it += 1
        for i in range(n):
            inv2 = 1.0 / (phi[i] * phi[i])
            for k in range(p):
                J[k * n + i] = -G[i * p + k] * inv2
            rhs[i] = r[i]
        dgelss(&mm, &nn, &nrhs, J, &mm, rhs, &ldb, sv, &rcond, &rank, work, &lwork, &info)
        if info != 0 or sv[p - 1] <= 0.0:
            status = SINGULAR
            break
        cond = (sv[0] / sv[p - 1]) * (sv[0] / sv[p - 1])
        if not cond <= JAC_CONDITION:
            status = SINGULAR
            break
        for k in range(p):
            step[k] = rhs[k]
        # dgelss leaves the linearized residuals' coordinates in rhs[p:n]
        predicted = 0.0
        for i in range(p, n):
            predicted = predicted + rhs[i] * rhs[i]
        if _rel(step, theta, p) < delta:
            status = PARAM
            break
        lam = 1.0
        accepted = 0
        for h in range(max_halv + 1):
            for k in range(p):
                cand[k] = theta[k] + lam * step[k]
            if _evaluate(G, cand, y, n, p, phi_min, phic, rc, &Sc):
                if Sc <= S:
                    accepted = 1
                    break
            lam = lam * 0.5
        if not accepted:
            if S - predicted <= sse_tol * S:
                status = SSE
            else:
                status = DAMPING
            break
        for k in range(p):
            moved[k] = cand[k] - theta[k]
            theta[k] = cand[k]
        for i in range(n):
            phi[i] = phic[i]
            r[i] = rc[i]
        S_old = S
        S = Sc
        trace[n_trace[0]] = S
        n_trace[0] += 1
        if _rel(moved, theta, p) < delta:
            status = PARAM
            break
        if S_old - S <= sse_tol * S_old:
            status = SSE
            break
    iters[0] = it
    return status


cdef inline int _ws_size(int n, int p, int lwork) noexcept nogil:
    cdef int ldb = n if n > p else p
    return n * p + ldb + p + 4 * n + 3 * p + lwork


def fit_reciprocal(const double[:, ::1] G, const double[::1] y, const double[::1] theta0,
                   double delta, double sse_tol, int max_iter, int max_halvings,
                   double phi_min):
    """Fit one dataset.  Returns ``(theta, trace, iterations, status)``."""
    cdef int n = G.shape[0], p = G.shape[1]
    cdef int lwork = _lwork(n, p)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] theta = np.array(theta0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] trace = np.empty(max_iter + 1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ws = np.empty(_ws_size(n, p, lwork), dtype=np.float64)
    cdef int n_trace = 0, iters = 0, status
    if y.shape[0] != n or theta0.shape[0] != p:
        raise ValueError("shape mismatch between G, y and theta0")
    status = _fit_one(&G[0, 0], &y[0], n, p, &theta[0], delta, sse_tol, max_iter,
                      max_halvings, phi_min, &trace[0], &n_trace, &iters, &ws[0], lwork)
    return theta, trace[:n_trace].copy(), iters, status


def refit_batch(const double[:, ::1] G, const double[:, ::1] Y, const double[::1] theta0,
                double delta, double sse_tol, int max_iter, int max_halvings,
                double phi_min, int threads=1):
    """Refit every row of `Y` from `theta0`.

    Returns ``(theta_star, status, iterations)``; row ``b`` depends only on
    ``Y[b]``, so the result is independent of `threads`.
    """
    cdef int n = G.shape[0], p = G.shape[1], B = Y.shape[0]
    cdef int lwork = _lwork(n, p), wsz = _ws_size(n, p, lwork)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((B, p), dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] status = np.empty(B, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] iters = np.empty(B, dtype=np.int32)
    cdef double[:, ::1] out_v = out
    cdef int[::1] st_v = status
    cdef int[::1] it_v = iters
    cdef int b, k, n_trace, it
    cdef double* ws
    cdef double* trace
    if Y.shape[1] != n or theta0.shape[0] != p:
        raise ValueError("shape mismatch between G, Y and theta0")
    if threads < 1:
        threads = 1
    for b in prange(B, nogil=True, num_threads=threads, schedule="static"):
        ws = <double*> malloc((wsz + max_iter + 1) * sizeof(double))
        if ws == NULL:
            st_v[b] = -1
            continue
        trace = ws + wsz
        for k in range(p):
            out_v[b, k] = theta0[k]
        st_v[b] = _fit_one(&G[0, 0], &Y[b, 0], n, p, &out_v[b, 0], delta, sse_tol,
                           max_iter, max_halvings, phi_min, trace, &n_trace, &it_v[b],
                           ws, lwork)
        free(ws)
    if np.any(status < 0):
        raise MemoryError("workspace allocation failed")
    return out, status, iters
