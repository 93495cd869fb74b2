"""Recursive character splitting into offset-tracked chunks with token overlap.

The splitter walks a separator hierarchy (paragraph, line, sentence, word,
character) and greedily packs pieces into chunks under a token budget, then
realizes overlap by extending each chunk's start backward to include the tail
tokens of its predecessor. Chunk text is always an exact slice of the source
document; nothing is ever copied or rewritten, so downstream span metrics can
score against original character offsets.

Tokens here are maximal whitespace-delimited segments (see ``count_tokens``).
Piece weights are per-piece token counts; summed weights can only overestimate
the merged text's token count, which keeps the packing bound safe.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from lexrag.corpus import Document

_NONSPACE = re.compile(r"\S+")

DEFAULT_SEPARATORS = ["\n\n", "\n", ". ", " ", ""]


def count_tokens(text: str) -> int:
    """Number of maximal nonempty whitespace-delimited segments."""
    return sum(1 for _ in _NONSPACE.finditer(text))


@dataclass
class ChunkConfig:
    target_tokens: int = 256
    overlap_tokens: int = 50
    separators: list[str] = field(default_factory=lambda: list(DEFAULT_SEPARATORS))

    def __post_init__(self) -> None:
        if self.target_tokens <= 0:
            raise ValueError("target_tokens must be positive")
        if not (0 <= self.overlap_tokens < self.target_tokens):
            raise ValueError("overlap_tokens must satisfy 0 <= overlap < target")
        if not self.separators or self.separators[-1] != "":
            raise ValueError('separators must end with "" (character-level fallback)')


@dataclass
class Chunk:
    chunk_id: str
    doc_id: str
    start: int
    end: int
    text: str
    ordinal: int
    core_start: int = 0  # where this chunk's own (non-overlap) region begins
    hard_split: bool = False

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "doc_id": self.doc_id,
            "start": self.start,
            "end": self.end,
            "text": self.text,
            "ordinal": self.ordinal,
            "core_start": self.core_start,
            "hard_split": self.hard_split,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Chunk":
        return cls(
            chunk_id=d["chunk_id"], doc_id=d["doc_id"], start=d["start"], end=d["end"],
            text=d["text"], ordinal=d["ordinal"],
            core_start=d.get("core_start", d["start"]),
            hard_split=d.get("hard_split", False),
        )


@dataclass
class _Core:
    """A chunk's own region before overlap extension: [start, end), packed weight."""

    start: int
    end: int
    weight: int
    hard: bool


class _CorePacker:
    """Greedy accumulator emitting core intervals in document order.

    The document's first core may use the full target; every later core
    reserves ``overlap`` tokens of capacity for the tail it will borrow from
    its predecessor. A single piece over capacity stands as its own core (the
    overlap borrow shrinks instead, see ``split_recursive``). Pieces with zero
    weight (pure whitespace) never force an emit; they glue to the open core.
    """

    def __init__(self, target: int, overlap: int):
        self.target = target
        self.overlap = overlap
        self.cores: list[_Core] = []
        self._start: int | None = None
        self._end = 0
        self._weight = 0
        self._hard = False

    def _capacity(self) -> int:
        if not self.cores:
            return self.target
        return max(1, self.target - self.overlap)

    def add(self, start: int, end: int, weight: int, hard: bool) -> None:
        if self._start is None:
            self._start, self._end = start, end
            self._weight, self._hard = weight, hard
            return
        if self._weight > 0 and weight > 0 and self._weight + weight > self._capacity():
            self.flush()
            if self._start is None:
                self._start, self._end = start, end
                self._weight, self._hard = weight, hard
                return
        self._end = end
        self._weight += weight
        self._hard = self._hard or hard

    def flush(self, force: bool = False) -> None:
        """Emit the open region as a core.

        A token-free region (pure whitespace) is glued to the previous core,
        or kept open to merge into whatever comes next, so no chunk ever
        consists solely of whitespace; ``force`` (end of document) emits it
        regardless when there is no neighbor to glue to.
        """
        if self._start is None:
            return
        if self._weight == 0:
            if self.cores:
                self.cores[-1].end = self._end
            elif not force:
                return  # keep open; the next add() will absorb it
            else:
                self.cores.append(_Core(self._start, self._end, 0, self._hard))
        else:
            self.cores.append(_Core(self._start, self._end, self._weight, self._hard))
        self._start = None
        self._end = 0
        self._weight = 0
        self._hard = False


def _find_boundaries(text: str, lo: int, hi: int, sep: str) -> list[int]:
    """Starts of non-overlapping separator occurrences strictly inside (lo, hi)."""
    boundaries = []
    pos = text.find(sep, lo, hi)
    while pos != -1:
        if pos > lo:
            boundaries.append(pos)
        pos = text.find(sep, pos + len(sep), hi)
    return boundaries


def _emit_cores(text: str, lo: int, hi: int, separators: list[str], target: int,
                packer: _CorePacker) -> None:
    """Split [lo, hi) at the first occurring separator and pack the parts.

    Parts within budget accumulate greedily at this level; an oversized part
    flushes the accumulator and recurses with the remaining separators, so a
    chunk never spans the boundary of a region that needed deeper splitting.
    The "" fallback packs single characters (whitespace weighs 0) and marks
    the resulting cores hard, recording that they were cut mid-token.
    """
    if lo >= hi:
        return
    for si, sep in enumerate(separators):
        if sep == "":
            for i in range(lo, hi):
                packer.add(i, i + 1, 0 if text[i].isspace() else 1, True)
            packer.flush()
            return
        boundaries = _find_boundaries(text, lo, hi, sep)
        if not boundaries:
            continue
        rest = separators[si + 1:]
        edges = [lo] + boundaries + [hi]
        for plo, phi in zip(edges, edges[1:]):
            w = count_tokens(text[plo:phi])
            if w <= target:
                packer.add(plo, phi, w, False)
            else:
                packer.flush()
                _emit_cores(text, plo, phi, rest, target, packer)
        packer.flush()
        return
    # no separator occurs in the region: it is one indivisible piece
    packer.add(lo, hi, count_tokens(text[lo:hi]), False)
    packer.flush()


def split_recursive(doc: Document, cfg: ChunkConfig | None = None) -> list[Chunk]:
    """Split a document into offset-tracked chunks under the token budget.

    Every chunk satisfies ``count_tokens(text) <= target_tokens``. Consecutive
    chunks overlap by exactly ``overlap_tokens`` tokens of the earlier chunk's
    tail whenever that many whole tokens can be borrowed without exceeding the
    budget or swallowing the earlier chunk entirely.
    """
    cfg = cfg or ChunkConfig()
    text = doc.text
    if not text:
        return []

    packer = _CorePacker(cfg.target_tokens, cfg.overlap_tokens)
    _emit_cores(text, 0, len(text), cfg.separators, cfg.target_tokens, packer)
    packer.flush(force=True)

    chunks: list[Chunk] = []
    prev: Chunk | None = None
    for ordinal, core in enumerate(packer.cores):
        start = core.start
        if prev is not None and cfg.overlap_tokens > 0:
            prev_token_starts = [m.start() + prev.start
                                 for m in _NONSPACE.finditer(prev.text)]
            borrow = min(cfg.overlap_tokens,
                         len(prev_token_starts) - 1,
                         cfg.target_tokens - core.weight)
            if borrow > 0:
                start = prev_token_starts[-borrow]
        chunk = Chunk(
            chunk_id=f"{doc.doc_id}#{ordinal:06d}",
            doc_id=doc.doc_id,
            start=start,
            end=core.end,
            text=text[start:core.end],
            ordinal=ordinal,
            core_start=core.start,
            hard_split=core.hard,
        )
        chunks.append(chunk)
        prev = chunk
    return chunks


def dump_chunks(chunks: list[Chunk], path: str | Path) -> None:
    """Write chunks as JSON-lines, one chunk per line with all fields."""
    with open(path, "w", encoding="utf-8") as fh:
        for chunk in chunks:
            fh.write(json.dumps(chunk.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def load_chunks(path: str | Path) -> list[Chunk]:
    chunks = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                chunks.append(Chunk.from_dict(json.loads(line)))
    return chunks
