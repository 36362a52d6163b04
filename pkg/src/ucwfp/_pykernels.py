"""Pure numpy implementations of the sparse-vector kernels.

Every routine here performs the same IEEE operations, in the same order, as
its counterpart in ``_kernels.pyx``; the two backends agree bit for bit.
"""
from __future__ import annotations

import math

import numpy as np

DROP = 1e-300


def _spread(idx, ia, va):
    out = np.zeros(idx.size, dtype=np.float64)
    out[np.searchsorted(idx, ia)] = va
    return out


def sparse_combine(ia, va, ib, vb, lam):
    """Entrywise ``(1 - lam) * a + lam * b`` over the union of supports."""
    idx = np.union1d(ia, ib).astype(np.int64, copy=False)
    c1 = 1.0 - lam
    val = c1 * _spread(idx, ia, va) + lam * _spread(idx, ib, vb)
    keep = np.abs(val) > DROP
    return idx[keep], val[keep]


def sparse_dist(ia, va, ib, vb):
    if ia.size == 0 and ib.size == 0:
        return 0.0
    idx = np.union1d(ia, ib)
    t = _spread(idx, ia, va) - _spread(idx, ib, vb)
    # sequential accumulation, matching the compiled loop
    return math.sqrt(float(np.cumsum(t * t)[-1]))


def sparse_norm(va):
    if va.size == 0:
        return 0.0
    return math.sqrt(float(np.cumsum(va * va)[-1]))


def gk_step(idx, val, weights):
    """One application of the squared-head weighted shift.

    ``(x1, x2, x3, ...) -> (0, x1**2, w[2]*x2, w[3]*x3, ...)``
    """
    if idx.size == 0:
        return idx, val
    if idx[0] == 1:
        head = val[0] * val[0]
        rest_i, rest_v = idx[1:], val[1:]
        new_i = np.concatenate(([2], rest_i + 1)).astype(np.int64)
        new_v = np.concatenate(([head], weights[rest_i] * rest_v))
    else:
        new_i = idx + 1
        new_v = weights[idx] * val
    keep = np.abs(new_v) > DROP
    return new_i[keep], new_v[keep]
