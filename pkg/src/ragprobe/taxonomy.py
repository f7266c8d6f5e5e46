"""Operational evidence roles from utility deltas and trace divergence.

A "corrective" role (removing a recovery path in a multi-step trace) is not
observable in single-shot traces and is never assigned.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .metrics import DeltaVector


class RoleLabel(str, enum.Enum):
    CONSTRUCTIVE = "constructive"
    REDUNDANT = "redundant"
    DISTRACTIVE = "distractive"
    CONFIDENCE_DISTORTING = "confidence_distorting"
    UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class RoleThresholds:
    eps_delta: float = 0.05
    eps_div: float = 0.10
    large_div: float = 0.40

    def __post_init__(self):
        if not (0.0 <= self.eps_div < self.large_div <= 1.0) or self.eps_delta <= 0:
            raise ValueError(f"invalid role thresholds: {self}")


def is_constructive(delta: DeltaVector, thr: RoleThresholds = RoleThresholds()) -> bool:
    return delta.d_correct > thr.eps_delta or delta.d_grounding > thr.eps_delta


def assign_role(delta: DeltaVector, thr: RoleThresholds = RoleThresholds()) -> RoleLabel:
    harmed = is_constructive(delta, thr)
    if harmed and delta.trace_div >= thr.large_div:
        return RoleLabel.DISTRACTIVE
    if harmed:
        return RoleLabel.CONSTRUCTIVE
    if abs(delta.d_conf_error) > thr.eps_delta and abs(delta.d_correct) <= thr.eps_delta:
        return RoleLabel.CONFIDENCE_DISTORTING
    small = max(abs(delta.d_correct), abs(delta.d_f1), abs(delta.d_grounding), abs(delta.d_conf_error))
    if small <= thr.eps_delta and delta.trace_div <= thr.eps_div:
        return RoleLabel.REDUNDANT
    return RoleLabel.UNCLASSIFIED


def role_flags(delta: DeltaVector, thr: RoleThresholds = RoleThresholds()) -> tuple[str, ...]:
    """Secondary labels: a distractive item that also meets the constructive test."""
    if assign_role(delta, thr) is RoleLabel.DISTRACTIVE and is_constructive(delta, thr):
        return (RoleLabel.CONSTRUCTIVE.value,)
    return ()
