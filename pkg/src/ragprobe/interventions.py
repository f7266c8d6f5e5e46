"""Target selection and the evidence perturbation operators."""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .answerer import TraceRecord
from .corpus import Chunk
from .retrieval import build_index, rank, tokenize

KINDS = ("remove", "replace", "duplicate", "zero", "joint_remove")
HARDNESS = ("easy", "medium", "hard")
POSITIONS = ("front", "after_original", "end")


class InterventionError(ValueError):
    pass


@dataclass(frozen=True)
class InterventionSpec:
    kind: str
    hardness: str | None = None
    position: str | None = None
    rng_seed: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InterventionError(f"unknown intervention kind {self.kind!r}")
        if self.hardness is not None and (self.kind != "replace" or self.hardness not in HARDNESS):
            raise InterventionError(f"hardness {self.hardness!r} is only valid for replace")
        if self.position is not None and (self.kind != "duplicate" or self.position not in POSITIONS):
            raise InterventionError(f"position {self.position!r} is only valid for duplicate")

    @property
    def label(self) -> str:
        extra = self.hardness or self.position
        return f"{self.kind}:{extra}" if extra else self.kind


def derive_seed(base: int, *names: object) -> int:
    """Stable 63-bit seed for a named substream of `base`."""
    key = "\x1f".join([str(base), *map(str, names)]).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") >> 1


def select_target(trace: TraceRecord | Sequence[str], retrieved: Sequence[Chunk], gold_titles: Iterable[str]) -> str:
    """Pick the chunk to intervene on.

    Priority: used support chunk, any used chunk, first retrieved support,
    top-ranked retrieved chunk. Used chunks are taken in reply order.
    """
    if not retrieved:
        raise InterventionError("select_target needs at least one retrieved chunk")
    if isinstance(trace, TraceRecord):
        used = trace.response.used_chunk_ids if trace.response else ()
    else:
        used = tuple(trace)
    gold = set(gold_titles)
    by_id = {c.chunk_id: c for c in retrieved}
    used_retrieved = [u for u in used if u in by_id]

    for u in used_retrieved:
        if by_id[u].title in gold:
            return u
    if used_retrieved:
        return used_retrieved[0]
    for c in retrieved:
        if c.title in gold:
            return c.chunk_id
    return retrieved[0].chunk_id


def _position(evidence: Sequence[Chunk], target_id: str) -> int:
    for i, c in enumerate(evidence):
        if c.chunk_id == target_id:
            return i
    raise InterventionError(f"target {target_id} is not in the evidence list")


def apply_remove(evidence: Sequence[Chunk], target_id: str) -> list[Chunk]:
    i = _position(evidence, target_id)
    return [*evidence[:i], *evidence[i + 1 :]]


def apply_replace(evidence: Sequence[Chunk], target_id: str, replacement: Chunk) -> list[Chunk]:
    i = _position(evidence, target_id)
    out = list(evidence)
    out[i] = replacement
    return out


def apply_duplicate(evidence: Sequence[Chunk], target_id: str, position: str = "end") -> list[Chunk]:
    i = _position(evidence, target_id)
    target = evidence[i]
    out = list(evidence)
    if position == "front":
        out.insert(0, target)
    elif position == "after_original":
        out.insert(i + 1, target)
    elif position == "end":
        out.append(target)
    else:
        raise InterventionError(f"unknown duplicate position {position!r}")
    return out


def joint_remove(evidence: Sequence[Chunk], support_ids: Sequence[str]) -> list[Chunk]:
    out = list(evidence)
    for sid in support_ids:
        out = apply_remove(out, sid)
    return out


def identify_support_chunks(retrieved: Sequence[Chunk], gold_titles: Iterable[str]) -> list[str]:
    gold = set(gold_titles)
    return [c.chunk_id for c in retrieved if c.title in gold]


def eligible_replacements(
    pool: Sequence[Chunk], gold_titles: Iterable[str], target: Chunk, evidence_ids: Iterable[str] = ()
) -> list[Chunk]:
    gold = set(gold_titles)
    excluded = {target.chunk_id, *evidence_ids}
    return [c for c in pool if c.title not in gold and c.chunk_id not in excluded]


def select_replacement(
    pool: Sequence[Chunk],
    gold_titles: Iterable[str],
    question_tokens: Sequence[str],
    target: Chunk,
    hardness: str = "medium",
    seed: int = 42,
    evidence_ids: Iterable[str] = (),
) -> Chunk:
    """Choose a non-support substitute for `target`.

    easy: seeded uniform draw; medium: best BM25 match to the question;
    hard: best BM25 match to the target's text. BM25 statistics come from the
    whole example pool.
    """
    eligible = eligible_replacements(pool, gold_titles, target, evidence_ids)
    if not eligible:
        raise InterventionError(f"no eligible replacement for {target.chunk_id}")
    if hardness == "easy":
        return random.Random(seed).choice(eligible)
    if hardness == "medium":
        query = list(question_tokens)
    elif hardness == "hard":
        query = tokenize(target.text)
    else:
        raise InterventionError(f"unknown hardness {hardness!r}")
    index = build_index(pool)
    best_id = rank(index, query, [c.chunk_id for c in eligible])[0][0]
    return next(c for c in eligible if c.chunk_id == best_id)
