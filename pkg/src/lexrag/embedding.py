"""Embedding providers: a deterministic offline backend and a remote HTTP backend.

The deterministic backend is a hashed bag-of-words: every term is hashed to
one of D buckets with a ±1 sign from a second hash stream, occurrences are
summed, and the vector is L2-normalized. It has no network dependency, is
bit-stable across runs and platforms, and preserves enough lexical-similarity
structure for offline evaluation of the retrieval stack.

Remote wire contract: POST {"texts": [...]} -> {"vectors": [[...], ...]}.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Protocol, Sequence

import numpy as np

from lexrag import kernels
from lexrag.remote import RemoteConfig, RemoteError, post_json
from lexrag.textutils import tokenize


class EmbeddingError(RuntimeError):
    def __init__(self, message: str, failed_indices: list[int] | None = None):
        super().__init__(message)
        self.failed_indices = failed_indices or []


class EmbeddingProvider(Protocol):
    """Batch of texts -> batch of unit-norm vectors, one per text."""

    backend: str
    dim: int

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class HashedBowEmbedder:
    """Deterministic test embedder over hashed bag-of-words term counts."""

    backend = "deterministic-test"

    def __init__(self, dim: int = 256):
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = dim
        self._cache: dict[str, tuple[int, float]] = {}

    def _hash_terms(self, terms: list[str]) -> None:
        missing = sorted({t for t in terms if t not in self._cache})
        if not missing:
            return
        blob = b"".join(t.encode("utf-8") for t in missing)
        offsets = np.zeros(len(missing) + 1, dtype=np.int64)
        np.cumsum([len(t.encode("utf-8")) for t in missing], out=offsets[1:])
        buckets, signs = kernels.hash_tokens(blob, offsets, self.dim)
        for term, bucket, sign in zip(missing, buckets, signs):
            self._cache[term] = (int(bucket), float(sign))

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        vectors = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            terms = tokenize(text)
            self._hash_terms(terms)
            if terms:
                buckets = np.fromiter((self._cache[t][0] for t in terms), dtype=np.int64,
                                      count=len(terms))
                signs = np.fromiter((self._cache[t][1] for t in terms), dtype=np.float64,
                                    count=len(terms))
                np.add.at(vectors[row], buckets, signs)
            norm = np.linalg.norm(vectors[row])
            if norm > 0:
                vectors[row] /= norm
            else:
                vectors[row, 0] = 1.0  # degenerate text: fixed unit vector
        return vectors


class RemoteEmbedder:
    """HTTP embedding backend; batches requests with bounded concurrency."""

    backend = "remote"

    def __init__(self, config: RemoteConfig, dim: int, batch_size: int = 32,
                 max_workers: int = 4):
        self.config = config
        self.dim = dim
        self.batch_size = batch_size
        self.max_workers = max_workers

    def _embed_batch(self, batch_index: int, texts: Sequence[str]) -> np.ndarray:
        response = post_json(self.config, {"texts": list(texts)})
        vectors = np.asarray(response.get("vectors", []), dtype=np.float64)
        if vectors.shape != (len(texts), self.dim):
            raise RemoteError(
                f"batch {batch_index}: expected shape {(len(texts), self.dim)}, "
                f"got {vectors.shape}")
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return vectors / norms

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        batches = [(i, texts[i:i + self.batch_size])
                   for i in range(0, len(texts), self.batch_size)]
        results: dict[int, np.ndarray] = {}
        failed: list[int] = []

        def run(entry):
            start, batch = entry
            try:
                results[start] = self._embed_batch(start // self.batch_size, batch)
            except RemoteError:
                failed.extend(range(start, start + len(batch)))

        if self.max_workers > 1 and len(batches) > 1:
            with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
                list(pool.map(run, batches))
        else:
            for entry in batches:
                run(entry)

        if failed:
            raise EmbeddingError(
                f"embedding failed for {len(failed)} text(s) after retries",
                failed_indices=sorted(failed))
        if not batches:
            return np.zeros((0, self.dim), dtype=np.float64)
        return np.vstack([results[start] for start, _ in batches])


def get_embedder(backend: str, dim: int = 256,
                 remote: RemoteConfig | None = None) -> EmbeddingProvider:
    if backend in ("deterministic", "deterministic-test"):
        return HashedBowEmbedder(dim=dim)
    if backend == "remote":
        if remote is None:
            raise ValueError("remote backend requires a RemoteConfig")
        return RemoteEmbedder(remote, dim=dim)
    raise ValueError(f"unknown embedder backend: {backend!r}")
