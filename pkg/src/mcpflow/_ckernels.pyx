# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Must stay numerically interchangeable with _pykernels."""

import numpy as np

from libc.math cimport exp, log, isfinite

cdef enum:
    MCP = 0
    LR = 3


def history_block(const double[::1] times,
                  const long long[::1] indptr,
                  const long long[::1] indices,
                  const double[::1] eval_times,
                  const long long[::1] hist_lens,
                  int variant,
                  double sigma,
                  Py_ssize_t n_dynamic):
    cdef Py_ssize_t n_eval = eval_times.shape[0]
    out = np.zeros((n_eval, n_dynamic), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t e, j, p
    cdef long long hl
    cdef double t, lag, w
    for e in range(n_eval):
        hl = hist_lens[e]
        t = eval_times[e]
        if variant == LR:
            if hl > 0:
                for p in range(indptr[hl - 1], indptr[hl]):
                    o[e, indices[p]] += 1.0
            continue
        for j in range(hl):
            if variant == MCP:
                lag = (t - times[j]) / sigma
                w = exp(-lag * lag)
            else:
                w = 1.0
            for p in range(indptr[j], indptr[j + 1]):
                o[e, indices[p]] += w
    return out


def softmax_xent(const double[:, ::1] logits,
                 const long long[::1] labels,
                 const double[::1] weights,
                 double[:, ::1] resid):
    cdef Py_ssize_t n = logits.shape[0]
    cdef Py_ssize_t K = logits.shape[1]
    cdef Py_ssize_t i, k
    cdef long long lab
    cdef double m, s, lse, w
    cdef double total = 0.0
    for i in range(n):
        lab = labels[i]
        if lab < 0:
            for k in range(K):
                resid[i, k] = 0.0
            continue
        m = logits[i, 0]
        for k in range(1, K):
            if logits[i, k] > m:
                m = logits[i, k]
        s = 0.0
        for k in range(K):
            s += exp(logits[i, k] - m)
        lse = m + log(s)
        if not isfinite(lse):
            raise FloatingPointError(f"non-finite logits in row {i}")
        w = weights[i]
        total -= w * (logits[i, lab] - lse)
        for k in range(K):
            resid[i, k] = w * exp(logits[i, k] - lse)
        resid[i, lab] -= w
    return total
