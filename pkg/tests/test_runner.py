import json
import threading

import pytest

from ragprobe.answerer import StatusError, StubAnswerer
from ragprobe.config import ExperimentConfig, load_config
from ragprobe.corpus import chunk_candidates, load_hotpotqa
from ragprobe.interventions import eligible_replacements
from ragprobe.metrics import jaccard_divergence
from ragprobe.retrieval import build_index, score, tokenize
from ragprobe.runner import (
    RunCache,
    cache_key,
    dup_position_study,
    hardness_sweep,
    run_example,
    run_experiment,
    study_arms,
    synergy_ablation,
    zero_retrieval_study,
)
from ragprobe.synthetic import make_records


def _examples(path):
    return load_hotpotqa(path)


def test_run_example_four_records(single_support_path, stub_config):
    cfg = stub_config(single_support_path)
    ex = _examples(single_support_path)[0]
    recs = run_example(ex, cfg, StubAnswerer())
    assert [r.arm for r in recs] == ["original", "remove", "replace", "duplicate"]
    assert all(r.ok for r in recs)
    orig, remove, replace, dup = recs
    assert orig.metrics.trace_div == 0.0 and orig.target_id is None
    # the only retrieved support is the target; without it the stub gives up
    assert remove.target_id == replace.target_id == dup.target_id
    assert remove.metrics.correct is False and remove.metrics.grounding == 0.0
    assert replace.metrics.correct is False and replace.metrics.grounding == 0.0
    assert dup.trace.response.answer == orig.trace.response.answer
    assert dup.trace.provided_evidence_ids.count(dup.target_id) == 2
    assert remove.target_id not in remove.trace.provided_evidence_ids


def test_records_carry_roles(single_support_path, stub_config):
    cfg = stub_config(single_support_path)
    recs = run_example(_examples(single_support_path)[0], cfg, StubAnswerer())
    assert recs[0].role is None
    assert recs[1].role == "distractive" and recs[1].role_flags == ("constructive",)
    assert recs[3].role == "redundant"


class Garbage:
    model_name = "garbage"

    def __init__(self, reply="no json here"):
        self.calls = 0
        self.reply = reply

    def complete(self, example, chunks, prompt):
        self.calls += 1
        return self.reply


def test_failed_original_skips_interventions(single_support_path, stub_config):
    cfg = stub_config(single_support_path)
    ans = Garbage()
    recs = run_example(_examples(single_support_path)[0], cfg, ans)
    assert [r.status for r in recs] == ["failed"] * 4
    assert ans.calls == 1
    assert recs[0].trace.raw_reply == "no json here"


class Flaky:
    """Stub whose intervention replies are unparseable."""

    model_name = "flaky"

    def __init__(self):
        self.calls = 0
        self.stub = StubAnswerer()

    def complete(self, example, chunks, prompt):
        self.calls += 1
        if self.calls % 4 == 2:
            return "sorry"
        return self.stub.complete(example, chunks, prompt)


def test_failed_interventions_excluded_pairwise(single_support_path, stub_config):
    cfg = stub_config(single_support_path, max_in_flight=1, cache_dir=None)
    rs = run_experiment(cfg, Flaky(), examples=_examples(single_support_path)[:3])
    remove = rs.by_arm("remove")
    assert [r.status for r in remove] == ["failed"] * 3
    assert all(r.ok for r in rs.by_arm("duplicate"))


class Down:
    model_name = "down"
    calls = 0

    def complete(self, example, chunks, prompt):
        raise StatusError(503, "overloaded")


def test_endpoint_errors_are_recorded_not_cached(single_support_path, stub_config, tmp_path):
    cfg = stub_config(single_support_path)
    rs = run_experiment(cfg, Down(), examples=_examples(single_support_path)[:2])
    assert all(r.status == "failed" for r in rs.records)
    assert "503" in rs.records[0].error
    assert len(RunCache(cfg.cache_dir)) == 0


def test_warm_cache_makes_no_calls(single_support_path, stub_config):
    cfg = stub_config(single_support_path)
    first = StubAnswerer()
    run_experiment(cfg, first)
    assert first.calls == 80
    second = StubAnswerer()
    rs = run_experiment(cfg, second)
    assert second.calls == 0 and rs.model_calls == 0


def test_cache_file_is_self_describing(single_support_path, stub_config):
    cfg = stub_config(single_support_path, limit=1)
    run_experiment(cfg)
    lines = open(f"{cfg.cache_dir}/replies.jsonl").read().splitlines()
    assert len(lines) == 4
    entry = json.loads(lines[0])
    assert entry["schema"] == 1 and entry["condition"] == "original" and entry["prompt_version"]


def test_cache_key_sensitivity():
    base = ("ex", "replace", "easy", None, "m", "v1", ["ctx_0"])
    k = cache_key(*base)
    assert cache_key(*base) == k
    for i, alt in enumerate(["ex2", "remove", "hard", "end", "m2", "v2", ["ctx_1"]]):
        changed = list(base)
        changed[i] = alt
        assert cache_key(*changed) != k


def test_cache_concurrent_puts(tmp_path):
    cache = RunCache(tmp_path)

    def put(i):
        cache.put({"key": f"k{i}", "raw_reply": "x" * 1000})

    threads = [threading.Thread(target=put, args=(i,)) for i in range(50)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(RunCache(tmp_path)) == 50


def test_stub_cohort_ordering(single_support_path, stub_config):
    rs = run_experiment(stub_config(single_support_path))
    mean = lambda arm: sum(r.metrics.correct for r in rs.by_arm(arm)) / len(rs.by_arm(arm))  # noqa: E731
    assert mean("original") == mean("duplicate") == 1.0
    assert mean("remove") == mean("replace") == 0.0


def test_results_in_example_order(single_support_path, stub_config):
    cfg = stub_config(single_support_path, max_in_flight=8, cache_dir=None)
    rs = run_experiment(cfg)
    ids = [r.example_id for r in rs.by_arm("original")]
    assert ids == [e.id for e in _examples(single_support_path)]


def test_empty_dataset_errors(write_json, stub_config):
    with pytest.raises(ValueError, match="no examples"):
        run_experiment(stub_config(write_json([])))


def test_missing_dataset_errors(stub_config, tmp_path):
    with pytest.raises(OSError):
        run_experiment(stub_config(tmp_path / "nope.json"))


def test_zero_study(single_support_path, stub_config):
    rs = zero_retrieval_study(stub_config(single_support_path))
    zero = rs.by_arm("zero")
    assert len(zero) == 20
    assert all(r.metrics.grounding == 0.0 for r in zero)
    assert all(r.trace.response.answer == "Unknown" and not r.metrics.correct for r in zero)
    assert all(r.trace.provided_evidence_ids == () for r in zero)


def test_sweep_same_target_and_hard_oracle(single_support_path, stub_config):
    rs = hardness_sweep(stub_config(single_support_path))
    assert rs.arms == ["original", "replace:easy", "replace:medium", "replace:hard"]
    examples = {e.id: e for e in _examples(single_support_path)}
    for orig in rs.by_arm("original"):
        arms = [r for r in rs.records if r.example_id == orig.example_id and r.arm != "original"]
        assert len({r.target_id for r in arms}) == 1
        hard = next(r for r in arms if r.arm == "replace:hard")
        # exhaustive oracle over the eligible pool
        ex = examples[orig.example_id]
        pool = chunk_candidates(ex)
        target = next(c for c in pool if c.chunk_id == hard.target_id)
        eligible = eligible_replacements(pool, ex.gold_support_titles, target, orig.trace.provided_evidence_ids)
        idx = build_index(pool)
        best = max(eligible, key=lambda c: (score(idx, tokenize(target.text), c.chunk_id), -c.index))
        slot = orig.trace.provided_evidence_ids.index(hard.target_id)
        assert hard.trace.provided_evidence_ids[slot] == best.chunk_id


def test_sweep_excludes_examples_without_replacement(write_json, stub_config):
    rec = {
        "_id": "tiny",
        "question": "Where is alpha?",
        "answer": "Beta",
        "supporting_facts": [["Alpha", 0]],
        "context": [["Alpha", ["Alpha is in Beta."]], ["Gamma", ["Gamma."]]],
    }
    rs = hardness_sweep(stub_config(write_json([rec])))
    assert [r.status for r in rs.records] == ["ok", "excluded", "excluded", "excluded"]


def test_dup_position_end_matches_main(single_support_path, stub_config):
    cfg = stub_config(single_support_path)
    main = run_experiment(cfg)
    dup = dup_position_study(cfg)
    for a, b in zip(main.by_arm("duplicate"), dup.by_arm("duplicate:end")):
        assert a.trace == b.trace and a.metrics == b.metrics
    originals = {r.example_id: r for r in dup.by_arm("original")}
    for r in dup.records:
        if r.arm != "original":
            o = originals[r.example_id]
            assert r.evidence_div == jaccard_divergence(o.trace.response.used_chunk_ids, r.trace.response.used_chunk_ids)


def test_synergy_runs_four_conditions(two_support_path, stub_config):
    rs = synergy_ablation(stub_config(two_support_path))
    assert all(r.ok for r in rs.records)
    assert len(rs.records) == 4 * 12
    first = rs.records[:4]
    s1, s2 = first[1].target_id, first[2].target_id
    assert s1 != s2
    assert s1 not in first[3].trace.provided_evidence_ids and s2 not in first[3].trace.provided_evidence_ids


def test_synergy_skips_single_support_examples(single_support_path, stub_config):
    rs = synergy_ablation(stub_config(single_support_path, limit=3))
    assert {r.status for r in rs.records} == {"excluded"}


def test_study_arms_validation():
    cfg = ExperimentConfig(interventions=("remove", "paraphrase"))
    with pytest.raises(ValueError):
        study_arms("run", cfg)
    with pytest.raises(ValueError):
        study_arms("nope", ExperimentConfig())


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("k: 3\nstub: strict\nthresholds:\n  eps_delta: 0.1\nweights: {w_evidence: 0.6, w_answer: 0.2, w_confidence: 0.2}\n")
    cfg = load_config(path)
    assert cfg.k == 3 and cfg.thresholds.eps_delta == 0.1 and cfg.weights.w_evidence == 0.6
    assert cfg.replace(k=7, stub=None).k == 7
    bad = tmp_path / "bad.yaml"
    bad.write_text("kay: 3\n")
    with pytest.raises(ValueError, match="unknown config keys"):
        load_config(bad)
    with pytest.raises(ValueError):
        ExperimentConfig(k=0)


def test_public_config_hides_key():
    assert "api_key" not in ExperimentConfig(api_key="sk-secret").public_dict()
    assert "sk-secret" not in repr(ExperimentConfig(api_key="sk-secret"))


def test_non_strict_make_records_count():
    assert len(make_records(5)) == 5
