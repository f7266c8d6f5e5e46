import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ragprobe.stats import (
    bootstrap_mean,
    format_p,
    paired_bootstrap,
    significance_stars,
    synergy_stats,
)

from . import oracles

FIXTURE = [0.0, 1.0, 1.0, 0.5, 0.0, 1.0, 0.8, 0.2, 1.0, 0.0, 0.6, 1.0, 0.0, 0.3, 1.0, 1.0, 0.0, 0.9, 0.4, 1.0]


def test_constant_values():
    r = bootstrap_mean([0.5] * 20)
    assert (r.mean, r.ci_low, r.ci_high) == (0.5, 0.5, 0.5)
    assert (r.resamples, r.seed, r.n) == (5000, 42, 20)


def test_single_value():
    r = bootstrap_mean([0.3])
    assert r.ci_low == r.ci_high == r.mean == 0.3


def test_empty_rejected():
    with pytest.raises(ValueError):
        bootstrap_mean([])


def test_ci_matches_independent_bootstrap():
    ours = bootstrap_mean(FIXTURE)
    lo, hi = oracles.slow_bootstrap_ci(FIXTURE, resamples=200_000, seed=123)
    assert abs(ours.ci_low - lo) <= 0.005
    assert abs(ours.ci_high - hi) <= 0.005
    assert ours.ci_low <= ours.mean <= ours.ci_high


def test_bootstrap_deterministic():
    assert bootstrap_mean(FIXTURE, seed=3) == bootstrap_mean(FIXTURE, seed=3)
    a = bootstrap_mean(FIXTURE, stream=("mean", "remove", "correct"))
    b = bootstrap_mean(FIXTURE, stream=("mean", "remove", "correct"))
    assert a == b


def test_substreams_differ():
    a = bootstrap_mean(FIXTURE, stream=("a",))
    b = bootstrap_mean(FIXTURE, stream=("b",))
    assert (a.ci_low, a.ci_high) != (b.ci_low, b.ci_high)


def test_all_zero_deltas():
    d = paired_bootstrap([1.0, 0.0, 1.0] * 10, [1.0, 0.0, 1.0] * 10)
    assert d.delta_mean == 0.0
    assert d.p_two_sided == 1.0
    assert format_p(d.p_two_sided) == "1.000"


def test_float_noise_counts_as_zero():
    d = paired_bootstrap([abs(0.9 - 1.0)] * 5, [abs(0.1 - 0.0)] * 5)
    assert d.p_two_sided == 1.0


def test_all_positive():
    d = paired_bootstrap([1.0] * 30, [0.0] * 30)
    assert d.p_two_sided < 0.001
    assert d.ci_low > 0
    assert format_p(d.p_two_sided) == "<0.001"


def test_length_mismatch():
    with pytest.raises(ValueError):
        paired_bootstrap([1.0, 2.0], [1.0])


def test_n8_fixture_near_sign_flip_oracle():
    # correctness-style deltas: six wins, two ties
    orig = [1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0]
    pert = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]
    p_exact = oracles.sign_flip_p(np.subtract(orig, pert))
    # only the all-plus and all-minus patterns of the six non-zero deltas reach |mean| = 6/8
    assert p_exact == 2 / 64
    assert abs(paired_bootstrap(orig, pert).p_two_sided - p_exact) <= 0.05


def test_stars():
    assert [significance_stars(p) for p in (0.0005, 0.005, 0.04, 0.2)] == ["***", "**", "*", ""]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=1, max_size=15), st.integers(0, 2**32))
def test_bit_identical_under_seed(values, seed):
    assert paired_bootstrap(values, [0.0] * len(values), 500, seed) == paired_bootstrap(
        values, [0.0] * len(values), 500, seed
    )
    assert 0.0 <= paired_bootstrap(values, [0.0] * len(values), 500, seed).p_two_sided <= 1.0


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.01, 1), min_size=2, max_size=15))
def test_sign_coherence(pos):
    d = paired_bootstrap(pos, [0.0] * len(pos), 2000)
    assert d.ci_low > 0
    assert d.p_two_sided < 0.001


# --- synergy -----------------------------------------------------------------


def test_synergy_zero():
    s = synergy_stats([0.0] * 4, [0.0] * 4, [0.0] * 4)
    assert (s.mean_drop_s1, s.mean_drop_both, s.pct_positive_synergy, s.pct_strong_complementary) == (0, 0, 0, 0)


def test_synergy_hand_computed():
    s1 = [0.0, 1.0, 0.0, 0.5]
    s2 = [0.0, 0.0, 0.2, 0.5]
    both = [1.0, 1.0, 0.2, 0.9]
    s = synergy_stats(s1, s2, both, eps=0.05)
    # synergy: 1.0, 0.0, 0.0, 0.4
    assert s.mean_synergy_over_max == pytest.approx(0.35)
    assert s.pct_positive_synergy == 50.0
    assert s.pct_strong_complementary == 25.0
    assert s.mean_drop_both == pytest.approx(0.775)
    assert s.n_eligible == 4


def test_synergy_misaligned():
    with pytest.raises(ValueError):
        synergy_stats([0.0], [0.0, 1.0], [0.0])
