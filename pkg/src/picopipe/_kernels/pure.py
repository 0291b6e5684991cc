"""Pure NumPy reference implementation of the hot kernels.

Algorithms and inner-loop operation order mirror the Cython backend so the
two agree to float rounding. Tag-index convention for the CRF transition
matrix (shape (K+2, K+2)): rows/cols 0..K-1 are tags, K is the virtual START
state and K+1 the virtual STOP state; trans[i, j] scores moving from i to j.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np

_TINY = 1e-12


def _logsumexp_rows(scores: np.ndarray) -> np.ndarray:
    """logsumexp over axis 0 of a (K, K) score grid, per column."""
    m = np.max(scores, axis=0)
    return m + np.log(np.sum(np.exp(scores - m), axis=0))


def crf_forward(emissions: np.ndarray, trans: np.ndarray) -> Tuple[float, np.ndarray]:
    """Forward recursion in log space.

    Returns (log partition, alphas) where alphas[t, j] is the log-sum of all
    length-(t+1) prefixes ending in tag j (START transition included).
    """
    T, K = emissions.shape
    start, stop = K, K + 1
    alphas = np.empty((T, K))
    alphas[0] = emissions[0] + trans[start, :K]
    for t in range(1, T):
        scores = alphas[t - 1][:, None] + trans[:K, :K]
        alphas[t] = emissions[t] + _logsumexp_rows(scores)
    final = alphas[T - 1] + trans[:K, stop]
    m = float(np.max(final))
    return m + float(np.log(np.sum(np.exp(final - m)))), alphas


def crf_backward(emissions: np.ndarray, trans: np.ndarray) -> np.ndarray:
    """Backward recursion: betas[t, i] = log-sum over suffixes given tag i at t
    (STOP transition included)."""
    T, K = emissions.shape
    stop = K + 1
    betas = np.empty((T, K))
    betas[T - 1] = trans[:K, stop]
    for t in range(T - 2, -1, -1):
        scores = trans[:K, :K] + (emissions[t + 1] + betas[t + 1])[None, :]
        m = np.max(scores, axis=1)
        betas[t] = m + np.log(np.sum(np.exp(scores - m[:, None]), axis=1))
    return betas


def viterbi(emissions: np.ndarray, trans: np.ndarray) -> Tuple[np.ndarray, float]:
    """Max-scoring tag path and its score; ties resolved toward the lowest
    tag index (argmax takes the first maximum)."""
    T, K = emissions.shape
    start, stop = K, K + 1
    delta = emissions[0] + trans[start, :K]
    backptr = np.zeros((T, K), dtype=np.int64)
    for t in range(1, T):
        scores = delta[:, None] + trans[:K, :K]
        best_prev = np.argmax(scores, axis=0)
        backptr[t] = best_prev
        delta = emissions[t] + scores[best_prev, np.arange(K)]
    final = delta + trans[:K, stop]
    last = int(np.argmax(final))
    path = np.empty(T, dtype=np.int64)
    path[T - 1] = last
    for t in range(T - 1, 0, -1):
        path[t - 1] = backptr[t, path[t]]
    return path, float(final[last])


def _sigmoid_scalar(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def sgns_epoch(
    emb: np.ndarray,
    ctx: np.ndarray,
    centers: np.ndarray,
    contexts: np.ndarray,
    negatives: np.ndarray,
    lr: float,
) -> float:
    """One skip-gram negative-sampling pass over pre-extracted training pairs.

    `emb` (node vectors) and `ctx` (context vectors) are updated in place with
    plain SGD, following the classic word2vec ordering: for each pair, the
    positive target and then each negative update the context row immediately,
    while the center-row update is accumulated and applied once per pair.
    Negatives equal to the positive context are skipped. Returns the summed
    loss -log sigma(u_o.v) - sum_n log sigma(-u_n.v).
    """
    total = 0.0
    n_neg = negatives.shape[1]
    for k in range(centers.shape[0]):
        c = centers[k]
        v = emb[c]
        accum = np.zeros_like(v)
        o = contexts[k]
        # positive target, label 1
        f = _sigmoid_scalar(float(np.dot(ctx[o], v)))
        total -= np.log(max(f, _TINY))
        g = lr * (1.0 - f)
        accum += g * ctx[o]
        ctx[o] += g * v
        for j in range(n_neg):
            n = negatives[k, j]
            if n == o:
                continue
            f = _sigmoid_scalar(float(np.dot(ctx[n], v)))
            total -= np.log(max(1.0 - f, _TINY))
            g = lr * (0.0 - f)
            accum += g * ctx[n]
            ctx[n] += g * v
        emb[c] += accum
    return float(total)
