"""Multi-hop QA loaders (HotpotQA distractor / 2WikiMultihopQA) and chunking."""
from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

log = logging.getLogger(__name__)

REQUIRED_FIELDS = ("question", "answer", "supporting_facts", "context")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Example:
    id: str
    question: str
    gold_answer: str
    gold_support_titles: frozenset[str]
    candidates: tuple[tuple[str, tuple[str, ...]], ...]


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    title: str
    text: str

    @property
    def index(self) -> int:
        return chunk_index(self.chunk_id)


def chunk_index(chunk_id: str) -> int:
    prefix, _, num = chunk_id.partition("_")
    if prefix != "ctx" or not num.isdigit():
        raise ValueError(f"not a chunk id: {chunk_id!r}")
    return int(num)


def _read_json_array(path: str | Path) -> list:
    raw = Path(path).read_bytes()
    text = raw.decode("utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise DatasetError(f"{path}: malformed JSON at byte offset {offset}: {exc.msg}") from exc
    if not isinstance(data, list):
        raise DatasetError(f"{path}: expected a JSON array of records")
    return data


def _record_id(record: dict, position: int) -> str:
    for key in ("_id", "id"):
        if key in record:
            return str(record[key])
    raise DatasetError(f"record #{position}: missing required field '_id'")


def _parse_record(record: dict, position: int) -> Example | None:
    if not isinstance(record, dict):
        raise DatasetError(f"record #{position}: expected an object")
    rid = _record_id(record, position)
    for name in REQUIRED_FIELDS:
        if name not in record:
            raise DatasetError(f"record {rid}: missing required field '{name}'")

    titles = frozenset(str(fact[0]) for fact in record["supporting_facts"])
    if not titles:
        log.warning("record %s has no supporting facts; skipped", rid)
        return None

    candidates = []
    for entry in record["context"]:
        title, sentences = entry[0], entry[1]
        title = str(title).strip()
        if not title:
            raise DatasetError(f"record {rid}: empty candidate title")
        if isinstance(sentences, str):
            sentences = [sentences]
        candidates.append((title, tuple(str(s) for s in sentences)))

    return Example(
        id=rid,
        question=str(record["question"]),
        gold_answer=str(record["answer"]),
        gold_support_titles=titles,
        candidates=tuple(candidates),
    )


def _load(path: str | Path) -> list[Example]:
    examples: list[Example] = []
    seen: set[str] = set()
    for position, record in enumerate(_read_json_array(path)):
        ex = _parse_record(record, position)
        if ex is None:
            continue
        if ex.id in seen:
            raise DatasetError(f"{path}: duplicate record id {ex.id}")
        seen.add(ex.id)
        examples.append(ex)
    return examples


def load_hotpotqa(path: str | Path) -> list[Example]:
    """Load a HotpotQA distractor-setting JSON array.

    Only supporting-fact titles are kept; sentence indices are dropped.
    """
    return _load(path)


def load_2wiki(path: str | Path) -> list[Example]:
    # 2WikiMultihopQA dev files share the HotpotQA record layout.
    return _load(path)


LOADERS = {"hotpotqa": load_hotpotqa, "2wiki": load_2wiki}


def load_dataset(path: str | Path, kind: str = "hotpotqa") -> list[Example]:
    try:
        loader = LOADERS[kind]
    except KeyError:
        raise DatasetError(f"unknown dataset kind {kind!r}; expected one of {sorted(LOADERS)}") from None
    return loader(path)


def select_examples(
    examples: Sequence[Example], limit: int | None = None, sample_seed: int | None = None
) -> list[Example]:
    """First `limit` examples, or a seeded sample of `limit` when `sample_seed` is set."""
    examples = list(examples)
    if limit is None or limit >= len(examples):
        return examples
    if sample_seed is None:
        return examples[:limit]
    picked = sorted(random.Random(sample_seed).sample(range(len(examples)), limit))
    return [examples[i] for i in picked]


def chunk_candidates(example: Example) -> list[Chunk]:
    return [
        Chunk(chunk_id=f"ctx_{i}", title=title, text=" ".join(s.strip() for s in sentences).strip())
        for i, (title, sentences) in enumerate(example.candidates)
    ]
