"""Synthetic HotpotQA-format datasets with controlled support retrieval.

Each record has two gold supports. The question shares an entity word and four
key words with support 1; four distractors each share one key word; the other
candidates share nothing. With `both_supports_retrieved`, support 2 also
carries the entity word, so BM25 top-5 contains both supports; otherwise it
ranks below every overlapping chunk and top-5 holds exactly one support.
"""
from __future__ import annotations

import json
import random
from pathlib import Path

_SYLLABLES = ("ka", "lo", "mi", "ter", "ven", "sol", "dra", "pu", "nex", "ri", "bal", "zo", "qua", "fen", "gor")


def _word(rng: random.Random, used: set[str]) -> str:
    while True:
        w = "".join(rng.choice(_SYLLABLES) for _ in range(3))
        if w not in used:
            used.add(w)
            return w


def make_record(i: int, rng: random.Random, both_supports_retrieved: bool = False, n_candidates: int = 10) -> dict:
    if n_candidates < 7:
        raise ValueError("need at least 7 candidates")
    used: set[str] = set()
    entity = _word(rng, used)
    keys = [_word(rng, used) for _ in range(4)]
    answer = f"{_word(rng, used).capitalize()} {_word(rng, used).capitalize()}"
    bridge = _word(rng, used)

    title_s1 = f"{entity.capitalize()} {_word(rng, used)}"
    title_s2 = f"{bridge.capitalize()} {_word(rng, used)}"
    s1 = [f"{title_s1} is known for {entity}.", f"It is linked with {' '.join(keys)} and {bridge}."]
    if both_supports_retrieved:
        s2 = [f"{title_s2} borders {entity} near {keys[0]} {keys[1]}.", f"Its main town is {answer}."]
    else:
        s2 = [f"{title_s2} lies beside {bridge}.", f"Its main town is {answer}."]

    distractors = []
    for key in keys:
        t = f"{_word(rng, used).capitalize()} {_word(rng, used)}"
        distractors.append([t, [f"{t} mentions {key}.", f"Also {_word(rng, used)} {_word(rng, used)}."]])
    fillers = []
    for _ in range(n_candidates - 6):
        t = f"{_word(rng, used).capitalize()} {_word(rng, used)}"
        fillers.append([t, [f"{t} concerns {_word(rng, used)}.", f"Near {_word(rng, used)}."]])

    # support 2 sits last so zero-score ties never pull it into the top-k
    context = [distractors[0], [title_s1, s1], *distractors[1:], *fillers, [title_s2, s2]]
    question = f"What seat belongs to the place tied to {entity} via {' '.join(keys)}?"
    return {
        "_id": f"syn{i:04d}",
        "question": question,
        "answer": answer,
        "supporting_facts": [[title_s1, 1], [title_s2, 1]],
        "context": context,
        "type": "bridge",
        "level": "medium",
    }


def make_records(n: int, seed: int = 0, both_supports_retrieved: bool = False, n_candidates: int = 10) -> list[dict]:
    rng = random.Random(seed)
    return [make_record(i, rng, both_supports_retrieved, n_candidates) for i in range(n)]


def write_dataset(path: str | Path, n: int, seed: int = 0, both_supports_retrieved: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(make_records(n, seed, both_supports_retrieved), indent=1), encoding="utf-8")
    return path
