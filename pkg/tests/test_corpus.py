import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ragprobe.corpus import (
    DatasetError,
    Example,
    chunk_candidates,
    load_2wiki,
    load_dataset,
    load_hotpotqa,
    select_examples,
)


def test_hotpot_support_titles(data_dir):
    examples = load_hotpotqa(data_dir / "hotpot_fixture.json")
    brown = examples[0]
    assert brown.gold_support_titles == {"Brown County, Kansas", "Brown State Fishing Lake"}
    assert brown.gold_answer == "9,984"


def test_hotpot_ten_candidates_in_source_order(data_dir):
    raw = json.loads((data_dir / "hotpot_fixture.json").read_text())
    brown = load_hotpotqa(data_dir / "hotpot_fixture.json")[0]
    assert len(brown.candidates) == 10
    assert [t for t, _ in brown.candidates] == [c[0] for c in raw[0]["context"]]


def test_empty_array(write_json):
    assert load_hotpotqa(write_json([])) == []
    assert load_2wiki(write_json([], "w.json")) == []


def test_2wiki_fixture(data_dir):
    examples = load_2wiki(data_dir / "2wiki_fixture.json")
    assert len(examples) == 3
    # "Blind Shaft" appears twice in supporting_facts
    assert examples[0].gold_support_titles == {"Blind Shaft", "The Mask Of Fu Manchu"}
    assert examples[1].gold_answer == "Małgorzata Braunek"


def test_malformed_json_names_byte_offset(tmp_path):
    path = tmp_path / "bad.json"
    path.write_bytes('[{"_id": "é", }]'.encode("utf-8"))
    with pytest.raises(DatasetError, match=r"byte offset 15"):
        load_hotpotqa(path)


def test_missing_field_names_record_and_field(write_json):
    path = write_json([{"_id": "r1", "question": "q", "supporting_facts": [["A", 0]], "context": []}])
    with pytest.raises(DatasetError, match=r"r1.*'answer'"):
        load_hotpotqa(path)


def test_records_without_supports_are_skipped(write_json, caplog):
    recs = [
        {"_id": "a", "question": "q", "answer": "x", "supporting_facts": [], "context": [["A", ["s"]]]},
        {"_id": "b", "question": "q", "answer": "x", "supporting_facts": [["A", 0]], "context": [["A", ["s"]]]},
    ]
    examples = load_hotpotqa(write_json(recs))
    assert [e.id for e in examples] == ["b"]
    assert "no supporting facts" in caplog.text


def test_duplicate_ids_rejected(write_json):
    rec = {"_id": "a", "question": "q", "answer": "x", "supporting_facts": [["A", 0]], "context": [["A", ["s"]]]}
    with pytest.raises(DatasetError, match="duplicate"):
        load_hotpotqa(write_json([rec, rec]))


def test_unknown_kind():
    with pytest.raises(DatasetError):
        load_dataset("x.json", "squad")


def _example(cands):
    return Example("e", "q", "a", frozenset({"T"}), tuple(cands))


def test_chunk_ids_and_text():
    chunks = chunk_candidates(_example([(f"T{i}", ("s",)) for i in range(5)]))
    assert [c.chunk_id for c in chunks] == ["ctx_0", "ctx_1", "ctx_2", "ctx_3", "ctx_4"]
    assert chunk_candidates(_example([("T", ("A.", "B."))]))[0].text == "A. B."
    assert chunk_candidates(_example([])) == []


def test_hotpot_leading_spaces_join_with_single_space(data_dir):
    chunk = chunk_candidates(load_hotpotqa(data_dir / "hotpot_fixture.json")[0])[0]
    assert "Kansas. As of" in chunk.text
    assert "  " not in chunk.text


def test_select_examples():
    exs = [Example(str(i), "q", "a", frozenset({"T"}), ()) for i in range(10)]
    assert [e.id for e in select_examples(exs, 3)] == ["0", "1", "2"]
    sampled = select_examples(exs, 3, sample_seed=7)
    assert sampled == select_examples(exs, 3, sample_seed=7)
    assert len(sampled) == 3
    assert select_examples(exs, None) == exs


titles = st.text(st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=8)
sentences = st.lists(st.text(max_size=10), max_size=3).map(tuple)


@given(st.lists(st.tuples(titles, sentences), max_size=8))
def test_chunking_deterministic_and_order_preserving(cands):
    ex = _example(cands)
    a, b = chunk_candidates(ex), chunk_candidates(ex)
    assert a == b
    assert [c.title for c in a] == [t for t, _ in cands]
    ids = [c.chunk_id for c in a]
    assert len(set(ids)) == len(ids)
    assert all(c.index == i for i, c in enumerate(a))
