"""Per-run metrics (correctness, F1, grounding, confidence error, trace divergence) and deltas."""
from __future__ import annotations

import re
import string
from collections import Counter
from dataclasses import dataclass, fields
from decimal import Decimal, InvalidOperation
from typing import Iterable, Mapping

from .answerer import ModelResponse

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT = str.maketrans(string.punctuation, " " * len(string.punctuation))
_NUMBER = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)")

YES = frozenset({"yes", "yeah", "yep", "true"})
NO = frozenset({"no", "nope", "false"})

F1_MATCH = 0.8


@dataclass(frozen=True)
class MetricVector:
    correct: bool
    answer_f1: float
    grounding: float
    conf_error: float
    trace_div: float = 0.0
    exact_match: bool = False


METRIC_NAMES = ("correct", "answer_f1", "grounding", "conf_error", "trace_div")


@dataclass(frozen=True)
class DeltaVector:
    d_correct: float
    d_f1: float
    d_grounding: float
    d_conf_error: float
    trace_div: float


@dataclass(frozen=True)
class DivergenceWeights:
    """Weights of the shallow-trace divergence proxy.

    The general divergence also has action-edit and verification terms; shallow
    single-shot traces carry no signal for them, so only these three exist.
    """

    w_evidence: float = 0.5
    w_answer: float = 0.3
    w_confidence: float = 0.2

    def __post_init__(self):
        ws = [self.w_evidence, self.w_answer, self.w_confidence]
        if min(ws) < 0 or abs(sum(ws) - 1.0) > 1e-9:
            raise ValueError(f"divergence weights must be non-negative and sum to 1, got {ws}")


def normalize_answer(text: str) -> str:
    text = text.lower().translate(_PUNCT)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def _yes_no(text: str) -> str | None:
    norm = normalize_answer(text)
    if norm in YES:
        return "yes"
    if norm in NO:
        return "no"
    return None


def _as_number(text: str) -> Decimal | None:
    s = text.strip().replace(",", "")
    if not _NUMBER.fullmatch(s):
        return None
    try:
        return Decimal(s)
    except InvalidOperation:
        return None


def exact_match(pred: str, gold: str) -> bool:
    return normalize_answer(pred) == normalize_answer(gold)


def token_f1(pred: str, gold: str) -> float:
    p, g = normalize_answer(pred).split(), normalize_answer(gold).split()
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    common = sum((Counter(p) & Counter(g)).values())
    if common == 0:
        return 0.0
    precision, recall = common / len(p), common / len(g)
    return 2 * precision * recall / (precision + recall)


def soft_correct(pred: str, gold: str) -> bool:
    if exact_match(pred, gold):
        return True
    yn_p, yn_g = _yes_no(pred), _yes_no(gold)
    if yn_p is not None and yn_p == yn_g:
        return True
    num_p, num_g = _as_number(pred), _as_number(gold)
    if num_p is not None and num_g is not None and num_p == num_g:
        return True
    return token_f1(pred, gold) >= F1_MATCH


def grounding_score(used_ids: Iterable[str], id_to_title: Mapping[str, str], gold_titles: Iterable[str]) -> float:
    """Share of used ids whose chunk title is a gold support title.

    Ids missing from `id_to_title` still count in the denominator.
    """
    used = set(used_ids)
    if not used:
        return 0.0
    gold = set(gold_titles)
    hits = sum(1 for u in used if id_to_title.get(u) in gold)
    return hits / len(used)


def confidence_error(confidence: float, correct: bool) -> float:
    return abs(confidence - (1.0 if correct else 0.0))


def jaccard_divergence(a: Iterable[str], b: Iterable[str]) -> float:
    a, b = set(a), set(b)
    union = a | b
    if not union:
        return 0.0
    return 1.0 - len(a & b) / len(union)


def trace_divergence(
    orig: ModelResponse, pert: ModelResponse, weights: DivergenceWeights = DivergenceWeights()
) -> float:
    answer_changed = normalize_answer(orig.answer) != normalize_answer(pert.answer)
    return (
        weights.w_evidence * jaccard_divergence(orig.used_chunk_ids, pert.used_chunk_ids)
        + weights.w_answer * float(answer_changed)
        + weights.w_confidence * abs(orig.confidence - pert.confidence)
    )


def evaluate(
    response: ModelResponse,
    gold_answer: str,
    id_to_title: Mapping[str, str],
    gold_titles: Iterable[str],
    trace_div: float = 0.0,
) -> MetricVector:
    correct = soft_correct(response.answer, gold_answer)
    return MetricVector(
        correct=correct,
        answer_f1=token_f1(response.answer, gold_answer),
        grounding=grounding_score(response.used_chunk_ids, id_to_title, gold_titles),
        conf_error=confidence_error(response.confidence, correct),
        trace_div=trace_div,
        exact_match=exact_match(response.answer, gold_answer),
    )


def utility_delta(orig: MetricVector, pert: MetricVector) -> DeltaVector:
    """Original minus intervention; positive means the original did better (conf_error aside)."""
    return DeltaVector(
        d_correct=float(orig.correct) - float(pert.correct),
        d_f1=orig.answer_f1 - pert.answer_f1,
        d_grounding=orig.grounding - pert.grounding,
        d_conf_error=orig.conf_error - pert.conf_error,
        trace_div=pert.trace_div,
    )


def metric_value(vec: MetricVector, name: str) -> float:
    return float(getattr(vec, name))


def as_dict(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in fields(obj)}
