# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: CRF dynamic programs and the skip-gram epoch.

Semantics match picopipe._kernels.pure exactly; see that module for the
contract. These loops dominate training time, hence the C versions.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

cdef double TINY = 1e-12
cdef double NEG_INF = -1e308


def crf_forward(double[:, ::1] emissions, double[:, ::1] trans):
    cdef Py_ssize_t T = emissions.shape[0]
    cdef Py_ssize_t K = emissions.shape[1]
    cdef Py_ssize_t start = K, stop = K + 1
    alphas_np = np.empty((T, K), dtype=np.float64)
    cdef double[:, ::1] alphas = alphas_np
    cdef Py_ssize_t t, i, j
    cdef double m, s, val

    for j in range(K):
        alphas[0, j] = emissions[0, j] + trans[start, j]
    for t in range(1, T):
        for j in range(K):
            m = NEG_INF
            for i in range(K):
                val = alphas[t - 1, i] + trans[i, j]
                if val > m:
                    m = val
            s = 0.0
            for i in range(K):
                s += exp(alphas[t - 1, i] + trans[i, j] - m)
            alphas[t, j] = emissions[t, j] + m + log(s)
    m = NEG_INF
    for j in range(K):
        val = alphas[T - 1, j] + trans[j, stop]
        if val > m:
            m = val
    s = 0.0
    for j in range(K):
        s += exp(alphas[T - 1, j] + trans[j, stop] - m)
    return m + log(s), alphas_np


def crf_backward(double[:, ::1] emissions, double[:, ::1] trans):
    cdef Py_ssize_t T = emissions.shape[0]
    cdef Py_ssize_t K = emissions.shape[1]
    cdef Py_ssize_t stop = K + 1
    betas_np = np.empty((T, K), dtype=np.float64)
    cdef double[:, ::1] betas = betas_np
    cdef Py_ssize_t t, i, j
    cdef double m, s, val

    for i in range(K):
        betas[T - 1, i] = trans[i, stop]
    for t in range(T - 2, -1, -1):
        for i in range(K):
            m = NEG_INF
            for j in range(K):
                val = trans[i, j] + emissions[t + 1, j] + betas[t + 1, j]
                if val > m:
                    m = val
            s = 0.0
            for j in range(K):
                s += exp(trans[i, j] + emissions[t + 1, j] + betas[t + 1, j] - m)
            betas[t, i] = m + log(s)
    return betas_np


def viterbi(double[:, ::1] emissions, double[:, ::1] trans):
    cdef Py_ssize_t T = emissions.shape[0]
    cdef Py_ssize_t K = emissions.shape[1]
    cdef Py_ssize_t start = K, stop = K + 1
    delta_np = np.empty(K, dtype=np.float64)
    next_np = np.empty(K, dtype=np.float64)
    backptr_np = np.zeros((T, K), dtype=np.int64)
    path_np = np.empty(T, dtype=np.int64)
    cdef double[::1] delta = delta_np
    cdef double[::1] nxt = next_np
    cdef long long[:, ::1] backptr = backptr_np
    cdef long long[::1] path = path_np
    cdef Py_ssize_t t, i, j, best, last
    cdef double m, val

    for j in range(K):
        delta[j] = emissions[0, j] + trans[start, j]
    for t in range(1, T):
        for j in range(K):
            m = NEG_INF
            best = 0
            for i in range(K):
                val = delta[i] + trans[i, j]
                if val > m:  # strict: first (lowest-index) maximum wins
                    m = val
                    best = i
            backptr[t, j] = best
            nxt[j] = emissions[t, j] + m
        for j in range(K):
            delta[j] = nxt[j]
    m = NEG_INF
    last = 0
    for j in range(K):
        val = delta[j] + trans[j, stop]
        if val > m:
            m = val
            last = j
    path[T - 1] = last
    for t in range(T - 1, 0, -1):
        path[t - 1] = backptr[t, path[t]]
    return path_np, m


cdef inline double _sigmoid(double x) nogil:
    cdef double e
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def sgns_epoch(
    double[:, ::1] emb,
    double[:, ::1] ctx,
    long long[::1] centers,
    long long[::1] contexts,
    long long[:, ::1] negatives,
    double lr,
):
    cdef Py_ssize_t n_pairs = centers.shape[0]
    cdef Py_ssize_t n_neg = negatives.shape[1]
    cdef Py_ssize_t dim = emb.shape[1]
    accum_np = np.zeros(dim, dtype=np.float64)
    cdef double[::1] accum = accum_np
    cdef Py_ssize_t k, j, d
    cdef long long c, o, n
    cdef double total = 0.0, dot, f, g

    for k in range(n_pairs):
        c = centers[k]
        o = contexts[k]
        for d in range(dim):
            accum[d] = 0.0
        dot = 0.0
        for d in range(dim):
            dot += ctx[o, d] * emb[c, d]
        f = _sigmoid(dot)
        total -= log(f if f > TINY else TINY)
        g = lr * (1.0 - f)
        for d in range(dim):
            accum[d] += g * ctx[o, d]
            ctx[o, d] += g * emb[c, d]
        for j in range(n_neg):
            n = negatives[k, j]
            if n == o:
                continue
            dot = 0.0
            for d in range(dim):
                dot += ctx[n, d] * emb[c, d]
            f = _sigmoid(dot)
            total -= log((1.0 - f) if (1.0 - f) > TINY else TINY)
            g = lr * (0.0 - f)
            for d in range(dim):
                accum[d] += g * ctx[n, d]
                ctx[n, d] += g * emb[c, d]
        for d in range(dim):
            emb[c, d] += accum[d]
    return total
