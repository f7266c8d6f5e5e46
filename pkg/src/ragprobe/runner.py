"""Run the original and perturbed conditions per example, with a JSON-lines answer cache."""
from __future__ import annotations

import hashlib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Protocol, Sequence

from .answerer import (
    PROMPT_VERSION,
    ChatAnswerer,
    ModelResponse,
    ParseError,
    StatusError,
    StubAnswerer,
    TraceRecord,
    TransportError,
    build_prompt,
    parse_response,
)
from .config import ExperimentConfig
from .corpus import Chunk, Example, chunk_candidates, load_dataset, select_examples
from .interventions import (
    InterventionError,
    apply_duplicate,
    apply_remove,
    apply_replace,
    derive_seed,
    identify_support_chunks,
    joint_remove,
    select_replacement,
    select_target,
)
from .metrics import (
    DeltaVector,
    MetricVector,
    evaluate,
    jaccard_divergence,
    trace_divergence,
    utility_delta,
)
from .retrieval import build_index, tokenize, top_k
from .taxonomy import assign_role, role_flags

log = logging.getLogger(__name__)

CACHE_SCHEMA = 1
STUDIES = ("run", "zero", "sweep", "dup-position", "synergy")


class Answerer(Protocol):
    model_name: str
    calls: int

    def complete(self, example: Example, chunks: Sequence[Chunk], prompt: str) -> str: ...


@dataclass(frozen=True)
class Arm:
    """One condition of a study: what to perturb and how."""

    name: str
    kind: str  # original | remove | replace | duplicate | zero | joint_remove
    hardness: str | None = None
    position: str | None = None
    on: str = "target"  # target | support_1 | support_2 | supports


ORIGINAL = Arm("original", "original")


def study_arms(study: str, config: ExperimentConfig) -> list[Arm]:
    if study == "run":
        arms = [ORIGINAL]
        for kind in config.interventions:
            if kind == "replace":
                arms.append(Arm("replace", "replace", hardness=config.hardness))
            elif kind == "duplicate":
                arms.append(Arm("duplicate", "duplicate", position=config.dup_position))
            elif kind in ("remove", "zero"):
                arms.append(Arm(kind, kind))
            else:
                raise ValueError(f"intervention {kind!r} is not available in the main study")
        return arms
    if study == "zero":
        return [ORIGINAL, Arm("zero", "zero")]
    if study == "sweep":
        return [ORIGINAL] + [Arm(f"replace:{h}", "replace", hardness=h) for h in ("easy", "medium", "hard")]
    if study == "dup-position":
        return [ORIGINAL] + [
            Arm(f"duplicate:{p}", "duplicate", position=p) for p in ("front", "after_original", "end")
        ]
    if study == "synergy":
        return [
            ORIGINAL,
            Arm("remove:support_1", "remove", on="support_1"),
            Arm("remove:support_2", "remove", on="support_2"),
            Arm("joint_remove", "joint_remove", on="supports"),
        ]
    raise ValueError(f"unknown study {study!r}; expected one of {STUDIES}")


@dataclass
class RunRecord:
    example_id: str
    arm: str
    condition: str
    status: str  # ok | failed | excluded
    target_id: str | None = None
    hardness: str | None = None
    position: str | None = None
    trace: TraceRecord | None = None
    metrics: MetricVector | None = None
    evidence_div: float | None = None
    delta: DeltaVector | None = None
    role: str | None = None
    role_flags: tuple[str, ...] = ()
    error: str | None = None
    started_at: str | None = None
    finished_at: str | None = None
    model_name: str = ""
    prompt_version: str = PROMPT_VERSION
    question: str = ""
    gold_answer: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def key(self) -> tuple:
        return (self.example_id, self.arm, self.hardness, self.position, self.model_name, self.prompt_version)


# ---------------------------------------------------------------------------
# cache


def cache_key(
    example_id: str,
    condition: str,
    hardness: str | None,
    position: str | None,
    model_name: str,
    prompt_version: str,
    evidence_ids: Sequence[str],
) -> str:
    payload = json.dumps(
        [example_id, condition, hardness, position, model_name, prompt_version, list(evidence_ids)]
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class RunCache:
    """Append-only JSON-lines store of raw model replies, keyed by `cache_key`."""

    def __init__(self, directory: str | Path | None):
        self.path = Path(directory) / "replies.jsonl" if directory else None
        self._entries: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            with self.path.open(encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        entry = json.loads(line)
                    except json.JSONDecodeError:
                        log.warning("skipping corrupt cache line in %s", self.path)
                        continue
                    if entry.get("schema") == CACHE_SCHEMA:
                        self._entries[entry["key"]] = entry

    def get(self, key: str) -> dict | None:
        with self._lock:
            return self._entries.get(key)

    def put(self, entry: dict) -> None:
        entry = {"schema": CACHE_SCHEMA, **entry}
        with self._lock:
            self._entries[entry["key"]] = entry
            if self.path:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def __len__(self) -> int:
        return len(self._entries)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


# ---------------------------------------------------------------------------
# per-example execution


@dataclass
class _Context:
    example: Example
    config: ExperimentConfig
    answerer: Answerer
    cache: RunCache
    chunks: list[Chunk] = field(default_factory=list)
    retrieved: list[Chunk] = field(default_factory=list)

    @property
    def id_to_title(self) -> dict[str, str]:
        return {c.chunk_id: c.title for c in self.chunks}


def _answer(ctx: _Context, arm: Arm, evidence: Sequence[Chunk]) -> tuple[TraceRecord, str, str]:
    """Query (or replay from cache) one condition; returns the trace and timestamps."""
    ex, model = ctx.example, ctx.answerer.model_name
    zero = arm.kind == "zero"
    ids = tuple(c.chunk_id for c in evidence)
    key = cache_key(ex.id, arm.kind, arm.hardness, arm.position, model, PROMPT_VERSION, ids)

    entry = ctx.cache.get(key)
    if entry is None:
        prompt = build_prompt(ex.question, evidence, zero=zero)
        started = _now()
        try:
            raw = ctx.answerer.complete(ex, evidence, prompt)
        except (TransportError, StatusError) as exc:
            # not cached: a later run should retry the endpoint
            trace = TraceRecord(arm.kind, ids, None, "", model, error=str(exc))
            return trace, started, _now()
        entry = {
            "key": key,
            "example_id": ex.id,
            "condition": arm.kind,
            "hardness": arm.hardness,
            "position": arm.position,
            "model_name": model,
            "prompt_version": PROMPT_VERSION,
            "evidence_ids": list(ids),
            "raw_reply": raw,
            "started_at": started,
            "finished_at": _now(),
        }
        ctx.cache.put(entry)

    raw = entry["raw_reply"]
    try:
        response: ModelResponse | None = parse_response(raw, known_ids=ctx.id_to_title)
        error = None
    except ParseError as exc:
        response, error = None, str(exc)
    trace = TraceRecord(arm.kind, ids, response, raw, model, error=error)
    return trace, entry["started_at"], entry["finished_at"]


def _evidence_for(ctx: _Context, arm: Arm, target_id: str | None, supports: Sequence[str]) -> tuple[list[Chunk], str | None]:
    ev = ctx.retrieved
    if arm.kind == "zero":
        return [], None
    if arm.on == "support_1":
        target_id = supports[0]
    elif arm.on == "support_2":
        target_id = supports[1]
    if arm.kind == "remove":
        return apply_remove(ev, target_id), target_id
    if arm.kind == "duplicate":
        return apply_duplicate(ev, target_id, arm.position or "end"), target_id
    if arm.kind == "joint_remove":
        return joint_remove(ev, supports[:2]), None
    if arm.kind == "replace":
        target = next(c for c in ev if c.chunk_id == target_id)
        hardness = arm.hardness or "medium"
        replacement = select_replacement(
            ctx.chunks,
            ctx.example.gold_support_titles,
            tokenize(ctx.example.question),
            target,
            hardness=hardness,
            seed=derive_seed(ctx.config.seed, "easy", ctx.example.id),
            evidence_ids=[c.chunk_id for c in ev],
        )
        return apply_replace(ev, target_id, replacement), target_id
    raise ValueError(f"unsupported arm kind {arm.kind!r}")


def run_example(
    example: Example,
    config: ExperimentConfig,
    answerer: Answerer,
    arms: Sequence[Arm] | None = None,
    cache: RunCache | None = None,
) -> list[RunRecord]:
    """Run the original condition, pick a target, then run every other arm on the same top-k."""
    arms = list(arms or study_arms("run", config))
    cache = cache if cache is not None else RunCache(None)
    base = dict(
        example_id=example.id,
        model_name=answerer.model_name,
        question=example.question,
        gold_answer=example.gold_answer,
    )
    if not example.candidates:
        return [RunRecord(arm="original", condition="original", status="excluded", error="no candidates", **base)]

    ctx = _Context(example, config, answerer, cache)
    ctx.chunks = chunk_candidates(example)
    index = build_index(ctx.chunks, config.bm25_k1, config.bm25_b)
    by_id = {c.chunk_id: c for c in ctx.chunks}
    ctx.retrieved = [by_id[i] for i in top_k(index, tokenize(example.question), config.k)]
    supports = identify_support_chunks(ctx.retrieved, example.gold_support_titles)
    titles = ctx.id_to_title
    gold = example.gold_support_titles

    if any(a.on != "target" for a in arms) and len(supports) < 2:
        return [
            RunRecord(arm=a.name, condition=a.kind, status="excluded", error="fewer than two supports retrieved", **base)
            for a in arms
        ]

    trace, t0, t1 = _answer(ctx, ORIGINAL, ctx.retrieved)
    if not trace.ok:
        failed = RunRecord(arm="original", condition="original", status="failed", trace=trace,
                           error=trace.error, started_at=t0, finished_at=t1, **base)
        skipped = [
            RunRecord(arm=a.name, condition=a.kind, status="failed", hardness=a.hardness, position=a.position,
                      error="original run failed", **base)
            for a in arms if a.kind != "original"
        ]
        return [failed, *skipped]

    orig_resp = trace.response
    orig_metrics = evaluate(orig_resp, example.gold_answer, titles, gold)
    records = [
        RunRecord(arm="original", condition="original", status="ok", trace=trace, metrics=orig_metrics,
                  evidence_div=0.0, started_at=t0, finished_at=t1, **base)
    ]
    target_id = select_target(trace, ctx.retrieved, gold)

    for arm in arms:
        if arm.kind == "original":
            continue
        common = dict(arm=arm.name, condition=arm.kind, hardness=arm.hardness, position=arm.position, **base)
        try:
            evidence, arm_target = _evidence_for(ctx, arm, target_id, supports)
        except InterventionError as exc:
            log.info("example %s excluded from %s: %s", example.id, arm.name, exc)
            records.append(RunRecord(status="excluded", error=str(exc), **common))
            continue
        ptrace, t0, t1 = _answer(ctx, arm, evidence)
        if not ptrace.ok:
            records.append(RunRecord(status="failed", trace=ptrace, target_id=arm_target, error=ptrace.error,
                                     started_at=t0, finished_at=t1, **common))
            continue
        div = trace_divergence(orig_resp, ptrace.response, config.weights)
        metrics = evaluate(ptrace.response, example.gold_answer, titles, gold, trace_div=div)
        delta = utility_delta(orig_metrics, metrics)
        records.append(
            RunRecord(
                status="ok",
                trace=ptrace,
                target_id=arm_target,
                metrics=metrics,
                evidence_div=jaccard_divergence(orig_resp.used_chunk_ids, ptrace.response.used_chunk_ids),
                delta=delta,
                role=assign_role(delta, config.thresholds).value,
                role_flags=role_flags(delta, config.thresholds),
                started_at=t0,
                finished_at=t1,
                **common,
            )
        )
    return records


# ---------------------------------------------------------------------------
# studies


@dataclass
class RunSet:
    study: str
    config: dict[str, Any]
    records: list[RunRecord]
    arms: list[str]
    model_calls: int = 0

    def by_arm(self, arm: str) -> list[RunRecord]:
        return [r for r in self.records if r.arm == arm]


def make_answerer(config: ExperimentConfig) -> Answerer:
    if config.stub:
        return StubAnswerer(strict=config.stub == "strict")
    return ChatAnswerer(config.endpoint_config())


def load_examples(config: ExperimentConfig) -> list[Example]:
    if not config.dataset:
        raise ValueError("no dataset configured")
    examples = select_examples(load_dataset(config.dataset, config.dataset_kind), config.limit, config.sample_seed)
    if not examples:
        raise ValueError(f"{config.dataset}: no examples left after filtering")
    return examples


def run_study(
    study: str,
    config: ExperimentConfig,
    answerer: Answerer | None = None,
    examples: Iterable[Example] | None = None,
) -> RunSet:
    arms = study_arms(study, config)
    examples = list(examples) if examples is not None else load_examples(config)
    if not examples:
        raise ValueError("no examples to run")
    answerer = answerer or make_answerer(config)
    cache = RunCache(config.cache_dir)
    calls_before = answerer.calls
    workers = max(1, config.max_in_flight)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        per_example = list(pool.map(lambda ex: run_example(ex, config, answerer, arms, cache), examples))
    records = [r for recs in per_example for r in recs]
    n_failed = sum(r.status == "failed" for r in records)
    if n_failed:
        log.warning("%d runs failed (unparseable reply or endpoint error)", n_failed)
    return RunSet(
        study=study,
        config=config.public_dict(),
        records=records,
        arms=[a.name for a in arms],
        model_calls=answerer.calls - calls_before,
    )


def run_experiment(config: ExperimentConfig, answerer: Answerer | None = None, examples=None) -> RunSet:
    return run_study("run", config, answerer, examples)


def zero_retrieval_study(config: ExperimentConfig, answerer: Answerer | None = None, examples=None) -> RunSet:
    return run_study("zero", config, answerer, examples)


def hardness_sweep(config: ExperimentConfig, answerer: Answerer | None = None, examples=None) -> RunSet:
    return run_study("sweep", config, answerer, examples)


def dup_position_study(config: ExperimentConfig, answerer: Answerer | None = None, examples=None) -> RunSet:
    return run_study("dup-position", config, answerer, examples)


def synergy_ablation(config: ExperimentConfig, answerer: Answerer | None = None, examples=None) -> RunSet:
    return run_study("synergy", config, answerer, examples)
