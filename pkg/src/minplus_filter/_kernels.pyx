# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: batched quadratic-form evaluation and the grid-DP sweep.

Signatures mirror ``_kernels_py``; ``threads`` <= 0 means the OpenMP default.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport floor

cnp.import_array()

BACKEND = "cython"


cdef inline double _form_value(const double[:, :, ::1] mats, Py_ssize_t k,
                               const double[:, ::1] pts, Py_ssize_t p,
                               Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc = mats[k, n, n]
    cdef double row, xi
    for i in range(n):
        xi = pts[p, i]
        row = 2.0 * mats[k, i, n]
        for j in range(n):
            row = row + mats[k, i, j] * pts[p, j]
        acc = acc + xi * row
    return 0.5 * acc


def eval_forms(mats, pts, int threads=0):
    cdef const double[:, :, ::1] M = np.ascontiguousarray(mats, dtype=np.float64)
    cdef const double[:, ::1] X = np.ascontiguousarray(pts, dtype=np.float64)
    cdef Py_ssize_t K = M.shape[0], P = X.shape[0], n = M.shape[1] - 1
    out_arr = np.empty((K, P), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t k, p
    cdef int nt = threads if threads > 0 else 0
    if nt > 0:
        for k in prange(K, nogil=True, num_threads=nt, schedule="static"):
            for p in range(P):
                out[k, p] = _form_value(M, k, X, p, n)
    else:
        for k in prange(K, nogil=True, schedule="static"):
            for p in range(P):
                out[k, p] = _form_value(M, k, X, p, n)
    return out_arr


def min_stats(mats, pts, int threads=0):
    vals_arr = eval_forms(mats, pts, threads)
    cdef const double[:, ::1] V = vals_arr
    cdef Py_ssize_t K = V.shape[0], P = V.shape[1]
    vmin_arr = np.empty(P, dtype=np.float64)
    arg_arr = np.empty(P, dtype=np.int64)
    wins_arr = np.zeros(K, dtype=np.int64)
    excess_arr = np.zeros(K, dtype=np.float64)
    cdef double[::1] vmin = vmin_arr
    cdef cnp.int64_t[::1] arg = arg_arr
    cdef cnp.int64_t[::1] wins = wins_arr
    cdef double[::1] excess = excess_arr
    cdef Py_ssize_t k, p, best
    cdef double bv, v
    for p in range(P):
        best = 0
        bv = V[0, p]
        for k in range(1, K):
            v = V[k, p]
            if v < bv:
                bv = v
                best = k
        vmin[p] = bv
        arg[p] = best
        wins[best] += 1
    for k in range(K):
        v = 0.0
        for p in range(P):
            v = v + (V[k, p] - vmin[p])
        excess[k] = v
    return vmin_arr, arg_arr, wins_arr, excess_arr


cdef inline double _interp(const double[::1] values, const double[::1] lo,
                           const double[::1] h, const cnp.int64_t[::1] counts,
                           double* z, Py_ssize_t n, double penalty) noexcept nogil:
    cdef double idx[2]
    cdef double t[2]
    cdef Py_ssize_t i0[2]
    cdef Py_ssize_t d, corner, flat, stride
    cdef double w, acc, upper
    cdef int bit
    for d in range(n):
        idx[d] = (z[d] - lo[d]) / h[d]
        upper = <double>(counts[d] - 1)
        if idx[d] < -1e-9 or idx[d] > upper + 1e-9:
            return penalty
        if idx[d] < 0.0:
            idx[d] = 0.0
        if idx[d] > upper:
            idx[d] = upper
        i0[d] = <Py_ssize_t>floor(idx[d])
        if i0[d] > counts[d] - 2:
            i0[d] = counts[d] - 2
        t[d] = idx[d] - i0[d]
    acc = 0.0
    for corner in range(1 << n):
        w = 1.0
        flat = 0
        stride = 1
        for d in range(n - 1, -1, -1):
            bit = (corner >> d) & 1
            if bit:
                w = w * t[d]
            else:
                w = w * (1.0 - t[d])
            flat = flat + (i0[d] + bit) * stride
            stride = stride * counts[d]
        acc = acc + w * values[flat]
    return acc


def dp_sweep(values, lo, h, counts, pts, A, a, b, w, wcost, double penalty, int threads=0):
    cdef const double[::1] V = np.ascontiguousarray(values, dtype=np.float64).ravel()
    cdef const double[::1] LO = np.ascontiguousarray(lo, dtype=np.float64)
    cdef const double[::1] H = np.ascontiguousarray(h, dtype=np.float64)
    cdef const cnp.int64_t[::1] C = np.ascontiguousarray(counts, dtype=np.int64)
    cdef const double[:, ::1] X = np.ascontiguousarray(pts, dtype=np.float64)
    cdef const double[:, ::1] AM = np.ascontiguousarray(A, dtype=np.float64)
    cdef const double[::1] AV = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[::1] BV = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[::1] W = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] WC = np.ascontiguousarray(wcost, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[1], P = X.shape[0], nw = W.shape[0]
    if n > 2:
        raise ValueError("dp_sweep supports at most two state dimensions")
    out_arr = np.empty(P, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t p
    cdef int nt = threads if threads > 0 else 0
    if nt > 0:
        for p in prange(P, nogil=True, num_threads=nt, schedule="static"):
            out[p] = _sweep_point(V, LO, H, C, X, AM, AV, BV, W, WC, p, n, nw, penalty)
    else:
        for p in prange(P, nogil=True, schedule="static"):
            out[p] = _sweep_point(V, LO, H, C, X, AM, AV, BV, W, WC, p, n, nw, penalty)
    return out_arr


cdef double _sweep_point(const double[::1] V, const double[::1] LO, const double[::1] H,
                         const cnp.int64_t[::1] C, const double[:, ::1] X,
                         const double[:, ::1] AM, const double[::1] AV,
                         const double[::1] BV, const double[::1] W,
                         const double[::1] WC, Py_ssize_t p, Py_ssize_t n,
                         Py_ssize_t nw, double penalty) noexcept nogil:
    cdef double base[2]
    cdef double z[2]
    cdef Py_ssize_t i, j, q
    cdef double best = 1e308
    cdef double v
    for i in range(n):
        base[i] = AV[i]
        for j in range(n):
            base[i] = base[i] + AM[i, j] * X[p, j]
    for q in range(nw):
        for i in range(n):
            z[i] = base[i] + BV[i] * W[q]
        v = _interp(V, LO, H, C, z, n, penalty) + WC[q]
        if v < best:
            best = v
    return best
