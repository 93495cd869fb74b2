"""Metadata enrichment of chunks: document header plus local window summaries.

Each chunk gets a header of the form ``[DOC] title | jurisdiction | type
[SUMMARY] <local summary>`` prepended to its text. Summaries describe
overlapping windows of 4 consecutive chunks; each chunk takes the summary of
the window whose center is nearest its ordinal. The header is truncated from
the summary end so it never exceeds the configured fraction of the enriched
chunk's tokens (default 25%).

Enrichment never touches the underlying chunk offsets or text, so retrieval
metrics always score against the original document positions.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from lexrag.chunker import Chunk, count_tokens
from lexrag.corpus import DocumentMeta
from lexrag.textutils import split_sentences

SUMMARY_TOKEN_CAP = 200
DEFAULT_WINDOW = 4


class SummarizerProvider(Protocol):
    """Contract for summary backends: a batch of texts in, one summary out.

    Deterministic backends must return identical output for identical input.
    """

    def summarize(self, texts: list[str], max_tokens: int) -> str: ...


@dataclass
class WindowSummary:
    doc_id: str
    window_start_ordinal: int
    window_len: int
    summary_text: str
    token_count: int
    fallback: bool = False


@dataclass
class EnrichedChunk:
    base: Chunk
    header_text: str
    full_text: str
    metadata_fraction: float
    summary_fallback: bool = False

    def to_dict(self) -> dict:
        d = self.base.to_dict()
        d.update({
            "header_text": self.header_text,
            "full_text": self.full_text,
            "metadata_fraction": self.metadata_fraction,
            "summary_fallback": self.summary_fallback,
        })
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnrichedChunk":
        return cls(
            base=Chunk.from_dict(d),
            header_text=d["header_text"],
            full_text=d["full_text"],
            metadata_fraction=d["metadata_fraction"],
            summary_fallback=d.get("summary_fallback", False),
        )


class ExtractiveSummarizer:
    """Deterministic offline summarizer: round-robin leading sentences."""

    def summarize(self, texts: list[str], max_tokens: int) -> str:
        return extractive_fallback_summary(texts, max_tokens)


class RemoteSummarizer:
    """HTTP summarizer: {"texts": [...], "max_tokens": N} -> {"summary": "..."}."""

    def __init__(self, config):
        self.config = config

    def summarize(self, texts: list[str], max_tokens: int) -> str:
        from lexrag.remote import post_json

        response = post_json(self.config, {"texts": list(texts), "max_tokens": max_tokens})
        summary = response.get("summary")
        if not isinstance(summary, str):
            raise ValueError(f"summarizer returned no summary field: {response!r}")
        return summary


def extractive_fallback_summary(texts: list[str], budget_tokens: int) -> str:
    """Concatenate leading sentences of each text round-robin, then truncate.

    Round r takes the (r+1)-th sentence of every text that still has one, in
    input order, until the token budget is reached. Deterministic; returns ""
    when every text is empty.
    """
    if budget_tokens < 1:
        raise ValueError("budget_tokens must be >= 1")
    sentence_lists = [split_sentences(t) for t in texts]
    picked: list[str] = []
    total = 0
    for round_idx in range(max((len(s) for s in sentence_lists), default=0)):
        for sentences in sentence_lists:
            if round_idx >= len(sentences):
                continue
            picked.append(sentences[round_idx])
            total += count_tokens(sentences[round_idx])
            if total >= budget_tokens:
                break
        if total >= budget_tokens:
            break
    tokens = " ".join(picked).split()
    return " ".join(tokens[:budget_tokens])


def window_positions(n_chunks: int, window: int, stride: int) -> list[int]:
    """Window start ordinals: 0, stride, ... plus the final full window."""
    if n_chunks <= 0:
        return []
    last = max(n_chunks - window, 0)
    positions = list(range(0, last + 1, stride))
    if positions[-1] != last:
        positions.append(last)
    return positions


def nearest_window_index(ordinal: int, positions: list[int], window: int) -> int:
    """Index of the window whose center is nearest the ordinal; ties go earlier."""
    best = 0
    best_dist = None
    for i, p in enumerate(positions):
        center = p + (window - 1) / 2.0
        dist = abs(ordinal - center)
        if best_dist is None or dist < best_dist:
            best, best_dist = i, dist
    return best


def window_summaries(chunks: list[Chunk], provider: SummarizerProvider,
                     window: int = DEFAULT_WINDOW, stride: int = 1,
                     max_workers: int = 1) -> list[WindowSummary]:
    """Summarize overlapping windows of consecutive chunks from one document.

    Provider failures fall back to the extractive summary for that window and
    set the fallback flag; the pipeline always completes. Provider calls may
    run concurrently (``max_workers``); results are keyed by window position,
    so output is independent of completion order.
    """
    if not chunks:
        return []
    doc_ids = {c.doc_id for c in chunks}
    if len(doc_ids) != 1:
        raise ValueError(f"window_summaries expects chunks from one document, got {sorted(doc_ids)}")
    ordinals = [c.ordinal for c in chunks]
    if ordinals != sorted(ordinals):
        raise ValueError("chunks must be ordered by ordinal")
    if window < 1 or stride < 1:
        raise ValueError("window and stride must be >= 1")

    positions = window_positions(len(chunks), window, stride)

    def summarize_at(pos: int) -> tuple[str, bool]:
        texts = [c.text for c in chunks[pos:pos + window]]
        try:
            return provider.summarize(texts, SUMMARY_TOKEN_CAP), False
        except Exception:
            return extractive_fallback_summary(texts, SUMMARY_TOKEN_CAP), True

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(summarize_at, positions))
    else:
        results = [summarize_at(p) for p in positions]

    summaries = []
    doc_id = chunks[0].doc_id
    for pos, (text, fell_back) in zip(positions, results):
        tokens = text.split()
        if len(tokens) > SUMMARY_TOKEN_CAP:
            text = " ".join(tokens[:SUMMARY_TOKEN_CAP])
            tokens = tokens[:SUMMARY_TOKEN_CAP]
        summaries.append(WindowSummary(
            doc_id=doc_id,
            window_start_ordinal=chunks[pos].ordinal,
            window_len=min(window, len(chunks) - pos),
            summary_text=text,
            token_count=len(tokens),
            fallback=fell_back,
        ))
    return summaries


def build_header(meta: DocumentMeta, summary_text: str) -> str:
    doc_fields = [f for f in (meta.title, meta.jurisdiction or "", meta.doc_type or "") if f]
    parts = []
    if doc_fields:
        parts.append("[DOC] " + " | ".join(doc_fields))
    if summary_text:
        parts.append("[SUMMARY] " + summary_text)
    return " ".join(parts)


def enrich_chunk(chunk: Chunk, meta: DocumentMeta, summary: WindowSummary | None,
                 max_fraction: float = 0.25) -> EnrichedChunk:
    """Prepend the metadata header, truncated to the token-fraction budget.

    Header tokens are dropped from the end until
    ``header_tokens / (header_tokens + body_tokens) <= max_fraction``.
    An empty header yields full_text identical to the chunk text.
    """
    if not (0 < max_fraction < 1):
        raise ValueError("max_fraction must be in (0, 1)")
    summary_text = summary.summary_text if summary is not None else ""
    header = build_header(meta, summary_text)
    body_tokens = count_tokens(chunk.text)
    header_tokens = header.split()
    while header_tokens and len(header_tokens) / (len(header_tokens) + body_tokens) > max_fraction:
        header_tokens.pop()
    if header_tokens and header_tokens[-1] in ("[SUMMARY]", "[DOC]"):
        header_tokens.pop()  # do not leave a dangling section marker
    header = " ".join(header_tokens)
    full_text = header + "\n" + chunk.text if header else chunk.text
    n_header = len(header_tokens)
    fraction = n_header / (n_header + body_tokens) if n_header else 0.0
    return EnrichedChunk(
        base=chunk,
        header_text=header,
        full_text=full_text,
        metadata_fraction=fraction,
        summary_fallback=summary.fallback if summary is not None else False,
    )


def enrich_document_chunks(chunks: list[Chunk], meta: DocumentMeta,
                           provider: SummarizerProvider,
                           window: int = DEFAULT_WINDOW, stride: int = 1,
                           max_fraction: float = 0.25,
                           max_workers: int = 1) -> list[EnrichedChunk]:
    """Full enrichment for one document's chunk list."""
    if not chunks:
        return []
    summaries = window_summaries(chunks, provider, window=window, stride=stride,
                                 max_workers=max_workers)
    positions = [s.window_start_ordinal for s in summaries]
    enriched = []
    for chunk in chunks:
        summary = summaries[nearest_window_index(chunk.ordinal, positions, window)]
        enriched.append(enrich_chunk(chunk, meta, summary, max_fraction=max_fraction))
    return enriched


def dump_enriched(chunks: list[EnrichedChunk], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for chunk in chunks:
            fh.write(json.dumps(chunk.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def load_enriched(path: str | Path) -> list[EnrichedChunk]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(EnrichedChunk.from_dict(json.loads(line)))
    return out
