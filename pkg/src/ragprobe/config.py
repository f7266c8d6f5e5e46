"""Experiment configuration: defaults, config-file loading, and overrides."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .answerer import EndpointConfig
from .metrics import DivergenceWeights
from .taxonomy import RoleThresholds


@dataclass
class ExperimentConfig:
    dataset: str | None = None
    dataset_kind: str = "hotpotqa"
    limit: int | None = None
    sample_seed: int | None = None
    seed: int = 42
    k: int = 5
    bm25_k1: float = 1.2
    bm25_b: float = 0.75
    model: str = "qwen3:8b"
    endpoint: str = "http://localhost:11434/v1"
    api_key: str | None = field(default=None, repr=False)
    timeout: float = 120.0
    max_in_flight: int = 4
    stub: str | None = None  # None, "default" or "strict"
    interventions: tuple[str, ...] = ("remove", "replace", "duplicate")
    hardness: str = "medium"
    dup_position: str = "end"
    weights: DivergenceWeights = field(default_factory=DivergenceWeights)
    thresholds: RoleThresholds = field(default_factory=RoleThresholds)
    resamples: int = 5000
    ci_level: float = 0.95
    cache_dir: str | None = ".ragprobe_cache"
    out_dir: str = "out"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.limit is not None and self.limit < 1:
            raise ValueError("limit must be >= 1")
        if self.stub not in (None, "default", "strict"):
            raise ValueError(f"stub must be 'default' or 'strict', got {self.stub!r}")
        self.interventions = tuple(self.interventions)
        if isinstance(self.weights, Mapping):
            self.weights = DivergenceWeights(**self.weights)
        if isinstance(self.thresholds, Mapping):
            self.thresholds = RoleThresholds(**self.thresholds)

    def endpoint_config(self) -> EndpointConfig:
        return EndpointConfig(
            url=self.endpoint,
            model=self.model,
            api_key=self.api_key,
            timeout=self.timeout,
            max_in_flight=self.max_in_flight,
        )

    def replace(self, **changes: Any) -> "ExperimentConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)

    def public_dict(self) -> dict:
        """Everything except the API key, JSON-ready."""
        out = dataclasses.asdict(self)
        out.pop("api_key")
        out["interventions"] = list(self.interventions)
        return out


def load_config(path: str | Path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    data = data or {}
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
    return ExperimentConfig(**data)
