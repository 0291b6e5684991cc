#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure NumPy fallback.

    python3 benchmarks/bench_kernels.py [--repeats 5]

Covers the two hot loops that dominate training time: the CRF dynamic
programs (forward / backward / Viterbi, called once per sentence per epoch)
and the skip-gram negative-sampling epoch. The LSTM layers are deliberately
not kernelized: their cost is dense matrix products already served by BLAS
through NumPy, where a scalar C loop would be slower.
"""

import argparse
import time

import numpy as np

from picopipe._kernels import backends
from picopipe.rng import Rng


def time_fn(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_crf(impl, repeats):
    rng = Rng(0)
    instances = []
    for _ in range(200):
        T = int(rng.integers(5, 40))
        em = np.ascontiguousarray(rng.normal(size=(T, 3)))
        instances.append(em)
    trans = np.ascontiguousarray(rng.normal(size=(5, 5)))

    def run_forward():
        for em in instances:
            impl.crf_forward(em, trans)

    def run_backward():
        for em in instances:
            impl.crf_backward(em, trans)

    def run_viterbi():
        for em in instances:
            impl.viterbi(em, trans)

    return {
        "crf_forward (200 sentences)": time_fn(run_forward, repeats),
        "crf_backward (200 sentences)": time_fn(run_backward, repeats),
        "viterbi (200 sentences)": time_fn(run_viterbi, repeats),
    }


def bench_sgns(impl, repeats):
    rng = Rng(1)
    n_nodes, dim, n_pairs, n_neg = 200, 64, 40_000, 5
    emb0 = rng.normal(size=(n_nodes, dim)) * 0.1
    ctx0 = rng.normal(size=(n_nodes, dim)) * 0.1
    centers = rng.integers(0, n_nodes, n_pairs).astype(np.int64)
    contexts = rng.integers(0, n_nodes, n_pairs).astype(np.int64)
    negatives = np.ascontiguousarray(rng.integers(0, n_nodes, (n_pairs, n_neg)).astype(np.int64))

    def run():
        emb = np.ascontiguousarray(emb0.copy())
        ctx = np.ascontiguousarray(ctx0.copy())
        impl.sgns_epoch(emb, ctx, centers, contexts, negatives, 0.01)

    return {"sgns_epoch (40k pairs, dim 64)": time_fn(run, repeats)}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    impls = backends()
    print(f"available backends: {', '.join(impls)}")
    results = {}
    for name, impl in impls.items():
        rows = {}
        rows.update(bench_crf(impl, args.repeats))
        rows.update(bench_sgns(impl, args.repeats))
        results[name] = rows

    labels = list(next(iter(results.values())))
    width = max(len(l) for l in labels)
    header = f"{'kernel':<{width}}" + "".join(f" {name:>12}" for name in results)
    if len(results) == 2:
        header += f" {'speedup':>9}"
    print(header)
    for label in labels:
        row = f"{label:<{width}}"
        for name in results:
            row += f" {results[name][label] * 1e3:>10.2f}ms"
        if len(results) == 2:
            row += f" {results['pure'][label] / results['cython'][label]:>8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
