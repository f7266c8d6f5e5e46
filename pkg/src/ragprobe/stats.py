"""Percentile bootstrap, paired bootstrap deltas, and two-support synergy summaries."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .interventions import derive_seed

DEFAULT_RESAMPLES = 5000
DEFAULT_SEED = 42
DEFAULT_LEVEL = 0.95
ZERO_TOL = 1e-12


@dataclass(frozen=True)
class BootstrapResult:
    mean: float
    ci_low: float
    ci_high: float
    n: int
    resamples: int = DEFAULT_RESAMPLES
    seed: int = DEFAULT_SEED


@dataclass(frozen=True)
class PairedDelta:
    delta_mean: float
    ci_low: float
    ci_high: float
    p_two_sided: float
    n: int = 0


@dataclass(frozen=True)
class SynergySummary:
    mean_drop_s1: float
    mean_drop_s2: float
    mean_drop_both: float
    mean_synergy_over_max: float
    pct_positive_synergy: float
    pct_strong_complementary: float
    n_eligible: int


def _rng(seed: int, stream: Sequence[object]) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *stream) if stream else seed)


def _resampled_means(values: np.ndarray, resamples: int, rng: np.random.Generator) -> np.ndarray:
    n = len(values)
    means = np.empty(resamples)
    # chunked to bound memory at large resample counts
    step = max(1, 2_000_000 // max(n, 1))
    for start in range(0, resamples, step):
        stop = min(resamples, start + step)
        idx = rng.integers(0, n, size=(stop - start, n))
        means[start:stop] = values[idx].mean(axis=1)
    return means


def bootstrap_mean(
    values: Sequence[float],
    resamples: int = DEFAULT_RESAMPLES,
    seed: int = DEFAULT_SEED,
    level: float = DEFAULT_LEVEL,
    stream: Sequence[object] = (),
) -> BootstrapResult:
    """Mean with a percentile bootstrap interval.

    `stream` names an independent substream of `seed` so that concurrent or
    reordered calls stay reproducible.
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("bootstrap_mean needs at least one value")
    means = _resampled_means(x, resamples, _rng(seed, stream))
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha])
    return BootstrapResult(float(x.mean()), float(lo), float(hi), int(x.size), resamples, seed)


def paired_bootstrap(
    orig: Sequence[float],
    pert: Sequence[float],
    resamples: int = DEFAULT_RESAMPLES,
    seed: int = DEFAULT_SEED,
    level: float = DEFAULT_LEVEL,
    stream: Sequence[object] = (),
) -> PairedDelta:
    a, b = np.asarray(orig, dtype=float), np.asarray(pert, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"paired samples differ in length: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("paired_bootstrap needs at least one pair")
    d = a - b
    # float noise (e.g. |0.9 - 1| vs |0.1 - 0|) must not register as an effect
    d[np.abs(d) < ZERO_TOL] = 0.0
    means = _resampled_means(d, resamples, _rng(seed, stream))
    # ties count on both sides, so all-zero deltas give 2 before the clamp
    p = 2.0 * min(np.mean(means >= 0.0), np.mean(means <= 0.0))
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha])
    return PairedDelta(float(d.mean()), float(lo), float(hi), float(min(1.0, p)), int(d.size))


def format_p(p: float, threshold: float = 0.001) -> str:
    return f"<{threshold:g}" if p < threshold else f"{p:.3f}"


def significance_stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def synergy_stats(
    drops_s1: Sequence[float], drops_s2: Sequence[float], drops_both: Sequence[float], eps: float = 0.05
) -> SynergySummary:
    s1, s2, both = (np.asarray(x, dtype=float) for x in (drops_s1, drops_s2, drops_both))
    if not (s1.size == s2.size == both.size):
        raise ValueError("synergy drop lists must be aligned")
    if s1.size == 0:
        raise ValueError("synergy_stats needs at least one eligible example")
    synergy = both - np.maximum(s1, s2)
    strong = (s1 <= eps) & (s2 <= eps) & (both > eps)
    return SynergySummary(
        mean_drop_s1=float(s1.mean()),
        mean_drop_s2=float(s2.mean()),
        mean_drop_both=float(both.mean()),
        mean_synergy_over_max=float(synergy.mean()),
        pct_positive_synergy=float(100.0 * np.mean(synergy > 0)),
        pct_strong_complementary=float(100.0 * np.mean(strong)),
        n_eligible=int(s1.size),
    )
