#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Runs each hot kernel on a corpus-scale workload and reports both paths side
by side. The same comparison can be forced at package level by setting
LEXRAG_PURE_NUMPY=1 before importing lexrag; here the two implementations are
invoked directly so a single process measures both.

Usage:
    python benchmarks/bench_kernels.py [--repeats 7]
"""

import argparse
import statistics
import time

import numpy as np

from lexrag import kernels


def timeit(fn, repeats: int) -> float:
    """Median wall time in milliseconds over ``repeats`` runs."""
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - start) * 1000)
    return statistics.median(samples)


def bench_bm25(rng, repeats):
    n_chunks, n_postings = 50_000, 400_000
    refs = rng.integers(0, n_chunks, n_postings).astype(np.int64)
    tfs = rng.integers(1, 15, n_postings).astype(np.float64)
    idfs = rng.random(n_postings)
    norms = rng.random(n_chunks) + 0.3

    def run_np():
        scores = np.zeros(n_chunks)
        kernels._bm25_accumulate_np(scores, refs, tfs, idfs, norms, 1.2)

    def run_nb():
        scores = np.zeros(n_chunks)
        kernels._bm25_accumulate_nb(scores, refs, tfs, idfs, norms, 1.2)

    return "bm25_accumulate (400k postings)", run_np, run_nb


def bench_hash(rng, repeats):
    n_tokens = 300_000
    tokens = ["t%d" % rng.integers(0, 60_000) for _ in range(n_tokens)]
    blob = b"".join(t.encode() for t in tokens)
    offsets = np.zeros(n_tokens + 1, dtype=np.int64)
    np.cumsum([len(t) for t in tokens], out=offsets[1:])
    data = np.frombuffer(blob, dtype=np.uint8)
    buckets = np.empty(n_tokens, dtype=np.int64)
    signs = np.empty(n_tokens, dtype=np.float64)

    def run_np():
        kernels._hash_tokens_np(data, offsets, 256, buckets, signs)

    def run_nb():
        kernels._hash_tokens_nb(data, offsets, 256, buckets, signs)

    return "hash_tokens (300k tokens)", run_np, run_nb


def bench_overlap(rng, repeats):
    n_spans, n_chunks = 500, 5_000
    s_doc = rng.integers(0, 150, n_spans).astype(np.int64)
    s_start = rng.integers(0, 100_000, n_spans).astype(np.int64)
    s_end = s_start + rng.integers(1, 600, n_spans)
    c_doc = rng.integers(0, 150, n_chunks).astype(np.int64)
    c_start = rng.integers(0, 100_000, n_chunks).astype(np.int64)
    c_end = c_start + rng.integers(1, 1500, n_chunks)

    def run_np():
        kernels._overlap_pairs_np(s_doc, s_start, s_end, c_doc, c_start, c_end)

    def run_nb():
        kernels._overlap_pairs_nb(s_doc, s_start, s_end, c_doc, c_start, c_end)

    return "overlap_pairs (500x5000)", run_np, run_nb


def bench_gather_means(rng, repeats):
    values = rng.random(1_000)
    idx = rng.integers(0, 1_000, size=(10_000, 1_000))

    def run_np():
        kernels._gather_means_np(values, idx)

    def run_nb():
        kernels._gather_means_nb(values, idx)

    return "gather_means (10k x 1k bootstrap)", run_np, run_nb


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    benches = [bench_bm25(rng, args.repeats), bench_hash(rng, args.repeats),
               bench_overlap(rng, args.repeats), bench_gather_means(rng, args.repeats)]

    print(f"{'kernel':<36}{'numpy (ms)':>12}{'numba (ms)':>12}{'speedup':>9}")
    for name, run_np, run_nb in benches:
        np_ms = timeit(run_np, args.repeats)
        if kernels.NUMBA_ENABLED:
            run_nb()  # JIT warm-up outside the timed region
            nb_ms = timeit(run_nb, args.repeats)
            print(f"{name:<36}{np_ms:>12.2f}{nb_ms:>12.2f}{np_ms / nb_ms:>8.1f}x")
        else:
            print(f"{name:<36}{np_ms:>12.2f}{'n/a':>12}{'n/a':>9}")
    if not kernels.NUMBA_ENABLED:
        print("\nnumba path unavailable (LEXRAG_PURE_NUMPY set or numba not installed)")


if __name__ == "__main__":
    main()
