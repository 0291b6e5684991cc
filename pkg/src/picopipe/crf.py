"""Linear-chain CRF over BIO tags.

Scores a tag path as the sum of per-position emission scores plus transition
scores between adjacent tags, including virtual START/STOP transitions.
Exact inference (log-partition, Viterbi) and maximum-likelihood gradients run
through the selected kernel backend; a brute-force enumerator serves as the
test oracle.

Transition matrix convention (shape (K+2, K+2)): indices 0..K-1 are tags,
K = START, K+1 = STOP; trans[i, j] scores the move i -> j. The column into
START and the row out of STOP are never read.
"""

from __future__ import annotations

import itertools
from typing import List, Sequence, Tuple

import numpy as np

from . import _kernels
from .rng import Rng

TAG_ORDER: Tuple[str, str, str] = ("B", "I", "O")

# Finite stand-in for a forbidden transition; far below any reachable path
# score, and exp(x - max) underflows to exactly 0 in the forward pass.
BLOCKED = -1e9

START_OFFSET = 0  # readability helpers: start index is K, stop is K + 1


def make_transitions(num_tags: int, rng: Rng | None = None, scale: float = 0.0) -> np.ndarray:
    """Fresh (K+2, K+2) transition matrix, zero or small random."""
    size = num_tags + 2
    if rng is None or scale == 0.0:
        return np.zeros((size, size))
    return rng.uniform(-scale, scale, (size, size))


def apply_bio_constraint(trans: np.ndarray) -> np.ndarray:
    """Return a copy with O->I and START->I forbidden (hard BIO decoding)."""
    k = trans.shape[0] - 2
    out = trans.copy()
    b, i, o = 0, 1, 2
    if k < 3:
        raise ValueError("BIO constraint requires at least 3 tags (B, I, O)")
    out[o, i] = BLOCKED
    out[k, i] = BLOCKED  # START -> I
    return out


def _check_instance(emissions: np.ndarray, trans: np.ndarray) -> Tuple[int, int]:
    emissions = np.ascontiguousarray(emissions, dtype=np.float64)
    T, K = emissions.shape
    if T < 1:
        raise ValueError("empty emission matrix (T=0)")
    if trans.shape != (K + 2, K + 2):
        raise ValueError(f"transition matrix shape {trans.shape} incompatible with K={K}")
    return T, K


def crf_log_partition(emissions: np.ndarray, trans: np.ndarray) -> float:
    """log sum over all K^T tag paths of exp(path score)."""
    _check_instance(emissions, trans)
    logz, _ = _kernels.crf_forward(
        np.ascontiguousarray(emissions, dtype=np.float64),
        np.ascontiguousarray(trans, dtype=np.float64),
    )
    return float(logz)


def viterbi_decode(emissions: np.ndarray, trans: np.ndarray) -> Tuple[List[int], float]:
    """Best-scoring tag path; ties break toward the lowest tag index at the
    final position and at every backtrack step."""
    _check_instance(emissions, trans)
    path, score = _kernels.viterbi(
        np.ascontiguousarray(emissions, dtype=np.float64),
        np.ascontiguousarray(trans, dtype=np.float64),
    )
    return [int(t) for t in path], float(score)


def path_score(emissions: np.ndarray, tags: Sequence[int], trans: np.ndarray) -> float:
    T, K = emissions.shape
    start, stop = K, K + 1
    s = trans[start, tags[0]] + emissions[0, tags[0]]
    for t in range(1, T):
        s += trans[tags[t - 1], tags[t]] + emissions[t, tags[t]]
    return float(s + trans[tags[-1], stop])


def crf_nll_and_grad(
    emissions: np.ndarray, gold_tags: Sequence[int], trans: np.ndarray
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Negative log-likelihood of the gold path plus gradients.

    Gradients are expected feature counts under the model (forward-backward
    marginals) minus the gold counts; returned for the emissions (T, K) and
    the full (K+2, K+2) transition matrix (START row / STOP column included).
    """
    T, K = _check_instance(emissions, trans)
    gold = list(gold_tags)
    if len(gold) != T:
        raise ValueError(f"gold tag length {len(gold)} != sentence length {T}")
    if any(not 0 <= y < K for y in gold):
        raise ValueError(f"gold tag out of range for K={K}: {gold}")
    emissions = np.ascontiguousarray(emissions, dtype=np.float64)
    trans = np.ascontiguousarray(trans, dtype=np.float64)
    start, stop = K, K + 1

    logz, alphas = _kernels.crf_forward(emissions, trans)
    betas = _kernels.crf_backward(emissions, trans)

    # Position marginals P(y_t = j).
    marg = np.exp(alphas + betas - logz)

    d_em = marg.copy()
    d_em[np.arange(T), gold] -= 1.0

    d_trans = np.zeros_like(trans)
    # Pairwise marginals P(y_t = i, y_{t+1} = j).
    for t in range(T - 1):
        pair = np.exp(
            alphas[t][:, None] + trans[:K, :K] + (emissions[t + 1] + betas[t + 1])[None, :] - logz
        )
        d_trans[:K, :K] += pair
    d_trans[start, :K] += marg[0]
    d_trans[:K, stop] += marg[T - 1]

    d_trans[start, gold[0]] -= 1.0
    for t in range(1, T):
        d_trans[gold[t - 1], gold[t]] -= 1.0
    d_trans[gold[-1], stop] -= 1.0

    nll = logz - path_score(emissions, gold, trans)
    return float(nll), d_em, d_trans


def crf_marginals(emissions: np.ndarray, trans: np.ndarray) -> np.ndarray:
    """Per-position tag marginals P(y_t = j); each row sums to 1."""
    _check_instance(emissions, trans)
    emissions = np.ascontiguousarray(emissions, dtype=np.float64)
    trans = np.ascontiguousarray(trans, dtype=np.float64)
    logz, alphas = _kernels.crf_forward(emissions, trans)
    betas = _kernels.crf_backward(emissions, trans)
    return np.exp(alphas + betas - logz)


def brute_force_oracle(emissions: np.ndarray, trans: np.ndarray) -> Tuple[float, List[int]]:
    """Exhaustive enumeration over all K^T paths: (log partition, best path).

    The best path breaks ties toward the lexicographically smallest tag
    sequence (enumeration order); Viterbi's per-backtrack-step rule may pick a
    different equal-scoring path, so compare scores, not paths.
    """
    T, K = _check_instance(emissions, trans)
    if K**T > 10**6:
        raise ValueError(f"instance too large to enumerate: K^T = {K}^{T}")
    scores = []
    best_path: List[int] | None = None
    best_score = -np.inf
    for tags in itertools.product(range(K), repeat=T):
        s = path_score(emissions, tags, trans)
        scores.append(s)
        if s > best_score:
            best_score = s
            best_path = list(tags)
    arr = np.array(scores)
    m = arr.max()
    logz = float(m + np.log(np.sum(np.exp(arr - m))))
    assert best_path is not None
    return logz, best_path
