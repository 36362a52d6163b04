# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sparse-vector kernels (merge-based, single pass)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()

cdef double DROP = 1e-300


def sparse_combine(const cnp.int64_t[::1] ia, const double[::1] va,
                   const cnp.int64_t[::1] ib, const double[::1] vb, double lam):
    cdef Py_ssize_t na = ia.shape[0], nb = ib.shape[0]
    cdef Py_ssize_t p = 0, q = 0, k = 0
    cdef double c1 = 1.0 - lam
    cdef double v
    cdef cnp.int64_t key
    out_i = np.empty(na + nb, dtype=np.int64)
    out_v = np.empty(na + nb, dtype=np.float64)
    cdef cnp.int64_t[::1] oi = out_i
    cdef double[::1] ov = out_v
    while p < na or q < nb:
        if q >= nb or (p < na and ia[p] < ib[q]):
            key = ia[p]
            v = c1 * va[p] + lam * 0.0
            p += 1
        elif p >= na or ib[q] < ia[p]:
            key = ib[q]
            v = c1 * 0.0 + lam * vb[q]
            q += 1
        else:
            key = ia[p]
            v = c1 * va[p] + lam * vb[q]
            p += 1
            q += 1
        if fabs(v) > DROP:
            oi[k] = key
            ov[k] = v
            k += 1
    return out_i[:k].copy(), out_v[:k].copy()


def sparse_dist(const cnp.int64_t[::1] ia, const double[::1] va,
                const cnp.int64_t[::1] ib, const double[::1] vb):
    cdef Py_ssize_t na = ia.shape[0], nb = ib.shape[0]
    cdef Py_ssize_t p = 0, q = 0
    cdef double s = 0.0, t
    while p < na or q < nb:
        if q >= nb or (p < na and ia[p] < ib[q]):
            t = va[p] - 0.0
            p += 1
        elif p >= na or ib[q] < ia[p]:
            t = 0.0 - vb[q]
            q += 1
        else:
            t = va[p] - vb[q]
            p += 1
            q += 1
        s += t * t
    return sqrt(s)


def sparse_norm(const double[::1] va):
    cdef Py_ssize_t i, n = va.shape[0]
    cdef double s = 0.0
    for i in range(n):
        s += va[i] * va[i]
    return sqrt(s)


def gk_step(const cnp.int64_t[::1] idx, const double[::1] val, const double[::1] weights):
    cdef Py_ssize_t n = idx.shape[0], i = 0, k = 0
    cdef double v
    out_i = np.empty(n, dtype=np.int64)
    out_v = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] oi = out_i
    cdef double[::1] ov = out_v
    if n == 0:
        return out_i, out_v
    if idx[0] == 1:
        v = val[0] * val[0]
        if fabs(v) > DROP:
            oi[k] = 2
            ov[k] = v
            k += 1
        i = 1
    while i < n:
        v = weights[idx[i]] * val[i]
        if fabs(v) > DROP:
            oi[k] = idx[i] + 1
            ov[k] = v
            k += 1
        i += 1
    return out_i[:k].copy(), out_v[:k].copy()
