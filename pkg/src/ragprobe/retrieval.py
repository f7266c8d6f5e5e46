"""Okapi BM25 over one example's candidate chunks."""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import Chunk, chunk_index

_TOKEN = re.compile(r"[^\W_]+")

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class Bm25Index:
    chunk_ids: tuple[str, ...]
    term_freqs: tuple[Counter, ...]
    doc_lengths: tuple[int, ...]
    avg_doc_length: float
    doc_freqs: dict[str, int] = field(repr=False)
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B

    @property
    def n_docs(self) -> int:
        return len(self.chunk_ids)

    def position(self, chunk_id: str) -> int:
        try:
            return self.chunk_ids.index(chunk_id)
        except ValueError:
            raise KeyError(f"chunk {chunk_id!r} is not in the index") from None

    def idf(self, term: str) -> float:
        # Robertson-Sparck-Jones with +0.5 smoothing, floored at zero.
        df = self.doc_freqs.get(term, 0)
        return max(0.0, math.log((self.n_docs - df + 0.5) / (df + 0.5)))


def build_index(chunks: Sequence[Chunk], k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> Bm25Index:
    if not chunks:
        raise ValueError("cannot build a BM25 index over zero chunks")
    if k1 <= 0 or not 0.0 <= b <= 1.0:
        raise ValueError(f"invalid BM25 parameters k1={k1}, b={b}")
    tfs = tuple(Counter(tokenize(f"{c.title} {c.text}")) for c in chunks)
    lengths = tuple(sum(tf.values()) for tf in tfs)
    df: Counter = Counter()
    for tf in tfs:
        df.update(tf.keys())
    # Guard the length normalisation when every chunk tokenizes to nothing.
    avg = sum(lengths) / len(lengths) or 1.0
    return Bm25Index(
        chunk_ids=tuple(c.chunk_id for c in chunks),
        term_freqs=tfs,
        doc_lengths=lengths,
        avg_doc_length=avg,
        doc_freqs=dict(df),
        k1=k1,
        b=b,
    )


def score(index: Bm25Index, query_tokens: Iterable[str], chunk_id: str) -> float:
    pos = index.position(chunk_id)
    tf = index.term_freqs[pos]
    norm = index.k1 * (1.0 - index.b + index.b * index.doc_lengths[pos] / index.avg_doc_length)
    total = 0.0
    for term in query_tokens:
        f = tf.get(term, 0)
        if f:
            total += index.idf(term) * f * (index.k1 + 1.0) / (f + norm)
    return total


def rank(index: Bm25Index, query_tokens: Sequence[str], chunk_ids: Iterable[str] | None = None) -> list[tuple[str, float]]:
    """(chunk_id, score) by descending score, ties by ascending ctx index."""
    ids = index.chunk_ids if chunk_ids is None else tuple(chunk_ids)
    scored = [(cid, score(index, query_tokens, cid)) for cid in ids]
    scored.sort(key=lambda item: (-item[1], chunk_index(item[0])))
    return scored


def top_k(index: Bm25Index, query_tokens: Sequence[str], k: int) -> list[str]:
    if k < 1:
        raise ValueError("k must be >= 1")
    return [cid for cid, _ in rank(index, query_tokens)[:k]]
