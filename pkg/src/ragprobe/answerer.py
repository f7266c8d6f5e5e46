"""Prompt construction, chat-completion client, reply parsing, and the offline stub."""
from __future__ import annotations

import json
import logging
import math
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import httpx

from .corpus import Chunk, Example

log = logging.getLogger(__name__)

PROMPT_VERSION = "qa-json-v1"

CONDITIONS = ("original", "remove", "replace", "duplicate", "zero", "joint_remove")

PROMPT_HEADER = """You are a QA system. Answer the question using ONLY
the provided context.

Return a JSON object with exactly these keys:
  "answer": your short answer,
  "confidence": float between 0 and 1,
  "used_chunk_ids": list of chunk IDs you relied on,
  "brief_reason": one sentence explanation.
"""

ZERO_CONTEXT = "Context: (No retrieved documents available. Answer from your own knowledge.)"

PROMPT_FOOTER = "Respond with valid JSON only."


class ParseError(ValueError):
    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class TransportError(RuntimeError):
    pass


class StatusError(RuntimeError):
    def __init__(self, status: int, body: str):
        super().__init__(f"endpoint returned HTTP {status}: {body}")
        self.status = status
        self.body = body


@dataclass(frozen=True)
class ModelResponse:
    answer: str
    confidence: float
    used_chunk_ids: tuple[str, ...] = ()
    brief_reason: str = ""
    unknown_ids: tuple[str, ...] = ()

    def to_json(self) -> str:
        return json.dumps(
            {
                "answer": self.answer,
                "confidence": self.confidence,
                "used_chunk_ids": list(self.used_chunk_ids),
                "brief_reason": self.brief_reason,
            }
        )


@dataclass(frozen=True)
class TraceRecord:
    condition: str
    provided_evidence_ids: tuple[str, ...]
    response: ModelResponse | None
    raw_reply: str
    model_name: str
    prompt_version: str = PROMPT_VERSION
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.response is not None


def build_prompt(question: str, chunks: Sequence[Chunk] | None, zero: bool = False) -> str:
    """Render the structured QA prompt.

    `zero=True` swaps the context block for the no-retrieval sentence. An empty
    chunk list without `zero` keeps the ordinary (empty) context block.
    """
    if zero:
        context = ZERO_CONTEXT
    else:
        lines = [f"[{c.chunk_id}] Title: {c.title} Content: {c.text}" for c in chunks or ()]
        context = "\n".join(["Context:", *lines])
    return f"{PROMPT_HEADER}\n{context}\n\nQuestion: {question}\n\n{PROMPT_FOOTER}\n"


# ---------------------------------------------------------------------------
# reply parsing


def _first_json_object(text: str) -> dict | None:
    decoder = json.JSONDecoder()
    start = text.find("{")
    while start != -1:
        try:
            obj, _ = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict):
            return obj
        start = text.find("{", start + 1)
    return None


def _as_confidence(value) -> float:
    scale = 1.0
    if isinstance(value, str):
        value = value.strip()
        if value.endswith("%"):
            value, scale = value[:-1], 0.01
    try:
        c = float(value) * scale
    except (TypeError, ValueError):
        return 0.0
    if math.isnan(c):
        return 0.0
    return min(1.0, max(0.0, c))


def _as_text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value.strip()
    return json.dumps(value) if isinstance(value, (list, dict)) else str(value)


def parse_response(raw: str, known_ids: Iterable[str] = ()) -> ModelResponse:
    obj = _first_json_object(raw)
    if obj is None:
        raise ParseError("no JSON object found in model reply", raw)

    ids = obj.get("used_chunk_ids") or []
    if isinstance(ids, str):
        ids = [ids]
    elif not isinstance(ids, list):
        ids = []
    used = tuple(dict.fromkeys(str(i).strip() for i in ids if str(i).strip()))
    known = set(known_ids)
    unknown = tuple(i for i in used if i not in known)

    return ModelResponse(
        answer=_as_text(obj.get("answer")),
        confidence=_as_confidence(obj.get("confidence", 0.0)),
        used_chunk_ids=used,
        brief_reason=_as_text(obj.get("brief_reason")),
        unknown_ids=unknown,
    )


# ---------------------------------------------------------------------------
# endpoint client


@dataclass
class EndpointConfig:
    url: str = "http://localhost:11434/v1"
    model: str = "qwen3:8b"
    api_key: str | None = field(default=None, repr=False)
    timeout: float = 120.0
    max_attempts: int = 3
    backoff: float = 1.0
    max_in_flight: int = 4

    def resolved_key(self) -> str | None:
        return os.environ.get("RAGPROBE_API_KEY") or os.environ.get("OPENAI_API_KEY") or self.api_key


RETRYABLE_STATUS = {408, 409, 429, 500, 502, 503, 504}


def query_model(
    endpoint: EndpointConfig,
    prompt: str,
    *,
    client: httpx.Client | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """POST one chat-completion request at temperature 0 and return the reply text."""
    url = endpoint.url.rstrip("/")
    if not url.endswith("/chat/completions"):
        url += "/chat/completions"
    headers = {"Content-Type": "application/json"}
    key = endpoint.resolved_key()
    if key:
        headers["Authorization"] = f"Bearer {key}"
    payload = {
        "model": endpoint.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": 0,
    }

    own_client = client is None
    client = client or httpx.Client(timeout=endpoint.timeout)
    try:
        for attempt in range(1, endpoint.max_attempts + 1):
            last = attempt == endpoint.max_attempts
            try:
                resp = client.post(url, json=payload, headers=headers)
            except httpx.TransportError as exc:
                if last:
                    raise TransportError(f"{url}: {type(exc).__name__} after {attempt} attempts") from exc
                log.info("transport error on attempt %d: %s", attempt, type(exc).__name__)
                sleep(endpoint.backoff * 2 ** (attempt - 1))
                continue
            if resp.status_code in RETRYABLE_STATUS and not last:
                log.info("HTTP %d on attempt %d, retrying", resp.status_code, attempt)
                sleep(endpoint.backoff * 2 ** (attempt - 1))
                continue
            if resp.status_code >= 400:
                raise StatusError(resp.status_code, resp.text[:500])
            body = resp.json()
            return body["choices"][0]["message"]["content"] or ""
    finally:
        if own_client:
            client.close()
    raise AssertionError("unreachable")


class ChatAnswerer:
    """Answers through an OpenAI-compatible endpoint, at most `max_in_flight` at once."""

    def __init__(self, endpoint: EndpointConfig, client: httpx.Client | None = None):
        self.endpoint = endpoint
        self.model_name = endpoint.model
        self.calls = 0
        self._client = client or httpx.Client(timeout=endpoint.timeout)
        self._slots = threading.BoundedSemaphore(max(1, endpoint.max_in_flight))
        self._lock = threading.Lock()

    def complete(self, example: Example, chunks: Sequence[Chunk], prompt: str) -> str:
        with self._slots:
            with self._lock:
                self.calls += 1
            return query_model(self.endpoint, prompt, client=self._client)

    def close(self) -> None:
        self._client.close()


# ---------------------------------------------------------------------------
# deterministic stub


def stub_answerer(example: Example, chunks: Sequence[Chunk], strict: bool = False) -> ModelResponse:
    """Answer correctly iff gold support evidence is present.

    The default variant needs any one support-titled chunk; `strict` needs every
    gold title to be present.
    """
    gold = example.gold_support_titles
    support_ids = tuple(dict.fromkeys(c.chunk_id for c in chunks if c.title in gold))
    present = {c.title for c in chunks} & gold
    ok = present == gold if strict else bool(present)
    if ok:
        return ModelResponse(example.gold_answer, 0.9, support_ids, "support evidence present")
    return ModelResponse("Unknown", 0.1, (), "no support evidence")


class StubAnswerer:
    def __init__(self, strict: bool = False):
        self.strict = strict
        self.model_name = "stub-strict" if strict else "stub"
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, example: Example, chunks: Sequence[Chunk], prompt: str) -> str:
        with self._lock:
            self.calls += 1
        return stub_answerer(example, chunks, strict=self.strict).to_json()

    def close(self) -> None:
        pass
