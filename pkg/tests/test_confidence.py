import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varbandit.confidence import (
    ConfidenceState,
    RadiusParams,
    beta_known_var,
    beta_ols,
    level_delta,
    num_levels,
    radius_unknown_var,
    update_sets_known_var,
    update_sets_ols,
    update_sets_unknown_var,
)
from varbandit.core import InteractionRecord, from_rows, random_class
from varbandit.environment import environment_streams
from varbandit.policies import PolicyParams, make_policy, policy_step
from varbandit.regression import HistoryStats

P = RadiusParams()


def test_beta_ols_examples():
    params = RadiusParams(delta=0.5)
    assert beta_ols(4, 8, params) == pytest.approx(4 * math.log(64))
    assert beta_ols(4, 8, params) == pytest.approx(16.6355, abs=1e-4)
    assert beta_ols(8, 8, params) - beta_ols(4, 8, params) == pytest.approx(4 * math.log(2))
    half = RadiusParams(bound=0.5, delta=0.5)
    assert beta_ols(4, 8, half) == pytest.approx(0.25 * beta_ols(4, 8, params))


def test_beta_known_var_examples():
    assert beta_known_var(5, 0.0, 0.0, 4, 0.1, P) == 0.0
    assert beta_known_var(2, 0.25, 0.01, 4, 0.1, P) == pytest.approx(1.16 * math.log(80))
    # the hand value is quoted to four decimals
    assert beta_known_var(2, 0.25, 0.01, 4, 0.1, P) == pytest.approx(5.0831, abs=1e-4)
    assert beta_known_var(3, 1.0, 0.0, 4, 0.1, P) == beta_known_var(3, 7.0, 0.0, 4, 0.1, P)


def test_radius_unknown_var_examples():
    L = math.log(4000)
    r = radius_unknown_var(10, 0.5, 0.04, 20, 1, 0.1, P)
    assert r == pytest.approx(0.5 * math.sqrt(0.04 * L) + 0.5 * L)
    assert r == pytest.approx(4.4350, abs=1e-4)
    assert radius_unknown_var(10, 0.5, 0.0, 20, 1, 0.1, P) == pytest.approx(0.5 * L)
    assert radius_unknown_var(10, 1.0, 0.04, 20, 1, 0.1, P) == pytest.approx(2 * r)


def test_num_levels_and_delta_shares():
    assert [num_levels(t) for t in (1, 2, 3, 4, 5, 8, 9)] == [0, 1, 2, 2, 3, 3, 4]
    assert level_delta(0.1, 0, 7, False) == pytest.approx(0.05)
    assert level_delta(0.1, 1, 7, True) == pytest.approx(0.1 / (16 * 49))


def test_radius_params_validation():
    with pytest.raises(ValueError):
        RadiusParams(delta=1.0)
    with pytest.raises(ValueError):
        RadiusParams(C=0.0)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10_000), st.integers(1, 100), st.floats(0, 2), st.floats(0, 1),
       st.floats(0, 5))
def test_radii_monotone(t, F, tau, s2, W):
    d = 0.05
    assert beta_ols(t + 1, F, P) >= beta_ols(t, F, P)
    base = beta_known_var(t, tau, s2, F, d, P)
    assert beta_known_var(t + 1, tau, s2, F, d, P) >= base
    assert beta_known_var(t, tau + 0.1, s2, F, d, P) >= base
    assert beta_known_var(t, tau, s2 + 0.1, F, d, P) >= base
    tau = max(tau, 1e-3)
    r = radius_unknown_var(t, tau, W, F, 1, d, P)
    assert radius_unknown_var(t, tau, W + 0.1, F, 1, d, P) >= r
    assert radius_unknown_var(t, tau * 1.5, W, F, 1, d, P) >= r
    assert radius_unknown_var(t + 1, tau, W, F, 1, d, P) >= r


def test_known_var_at_full_scale_never_tighter_than_ols():
    for t in (1, 2, 10, 1000):
        for F in (2, 20, 50):
            b_known = beta_known_var(t, 1.0, 1.0, F, level_delta(0.1, 0, t, False), P)
            assert b_known >= beta_ols(t, F, P)


def stats_with(fc, entries):
    stats = HistoryStats.for_class(fc)
    for t, (x, a, r, w) in enumerate(entries, start=1):
        stats.append(InteractionRecord(t, x, a, r, w))
    return stats


def test_ols_sets_first_round_and_huge_radius():
    fc = random_class(5, 2, 2, rng=0)
    state = update_sets_ols(ConfidenceState.initial(5), fc, 0, stats_with(fc, []), 1, P)
    assert state.mask.all()
    stats = stats_with(fc, [(0, 0, 0.5, 1.0)] * 5)
    state = update_sets_ols(ConfidenceState.initial(5), fc, 0, stats, 6, RadiusParams(C=1e6))
    assert state.mask.all()


def test_ols_sets_drop_far_function():
    fc = from_rows([[0.0], [1.0]], 1, 1)
    stats = stats_with(fc, [(0, 0, 0.0, 1.0)] * 30)
    # distance 30 against beta = 4 ln(31 * 2 / 0.1) ~ 25.7
    assert 30 > beta_ols(31, 2, P)
    state = update_sets_ols(ConfidenceState.initial(2), fc, 0, stats, 31, P)
    assert state.mask.tolist() == [True, False]
    assert state.degeneracy_events == 0


def test_known_var_first_round_is_full():
    fc = random_class(5, 2, 2, rng=0)
    state = update_sets_known_var(ConfidenceState.initial(5), fc, stats_with(fc, []), 1, 0.01, P)
    assert state.mask.all()
    assert all(m.all() for m in state.level_masks.values())
    assert state.q == 0 and list(state.level_masks) == [0]


def test_unknown_var_first_round_is_full():
    fc = random_class(5, 2, 2, rng=0)
    state = update_sets_unknown_var(ConfidenceState.initial(5), fc, stats_with(fc, []), 1, P)
    assert state.mask.all()
    assert state.level_masks == {}


def test_unknown_var_zero_noise_collapses_band_variance():
    fc = random_class(6, 2, 2, rng=2)
    rng = np.random.default_rng(0)
    entries = []
    for _ in range(40):
        x, a = int(rng.integers(2)), int(rng.integers(2))
        entries.append((x, a, float(fc.values[0, x, a]), float(rng.choice([0.75, 0.4, 0.2]))))
    stats = stats_with(fc, entries)
    state = update_sets_unknown_var(ConfidenceState.initial(6), fc, stats, 41, P)
    assert state.mask[0]
    for i, w in state.band_variance.items():
        assert w == pytest.approx(0.0, abs=1e-12)
        L = math.log(2 * i * i * 41 * 6 / P.delta)
        assert state.radii[i] == pytest.approx(2.0 ** -i * L)


def test_degenerate_set_resets_to_fit():
    # wide rounds say the mean is 0, narrow rounds say 1: each threshold keeps a
    # different function and their intersection is empty
    fc = from_rows([[0.0], [1.0]], 1, 1)
    stats = stats_with(fc, [(0, 0, 0.0, 1.0)] * 100 + [(0, 0, 1.0, 0.5)] * 100)
    state = update_sets_known_var(ConfidenceState.initial(2), fc, stats, 201, 0.0, P)
    assert state.level_masks[0].tolist() == [True, False]
    assert state.level_masks[1].tolist() == [True, True]  # {f1} joined by the reset fit f0
    assert state.degenerate_now and state.degeneracy_events == 1
    assert state.mask.tolist() == [True, False]


def test_ols_set_always_holds_its_fit():
    fc = from_rows([[0.0], [1.0]], 1, 1)
    stats = stats_with(fc, [(0, 0, 0.5, 1.0)] * 200)
    state = update_sets_ols(ConfidenceState.initial(2), fc, 0, stats, 201, RadiusParams(C=1e-6))
    assert state.mask.tolist() == [True, False]
    assert state.degeneracy_events == 0


def run_trace(kind, seed, horizon=200, sigma=0.2):
    fc = random_class(12, 3, 3, rng=seed)
    ctx, noise, prng = environment_streams(seed)
    policy = make_policy(kind, fc, PolicyParams(known_variance=sigma ** 2), prng)
    stats = HistoryStats.for_class(fc)
    masks, levels = [], []
    for t in range(1, horizon + 1):
        x = int(ctx.integers(3))
        d = policy_step(policy, t, x, stats)
        masks.append(policy.mask.copy())
        levels.append({i: m.copy() for i, m in policy.state.level_masks.items()})
        r = fc.values[0, x, d.action] + (sigma if noise.random() < 0.5 else -sigma)
        stats.append(InteractionRecord(t, x, d.action, r, d.width_at_play))
    return policy, masks, levels


@pytest.mark.parametrize("kind", ["sols_known", "sols_estimated", "sols_unknown"])
def test_sets_are_nested(kind):
    for seed in range(3):
        _, masks, levels = run_trace(kind, seed)
        for prev, cur in zip(masks, masks[1:]):
            assert not np.any(cur & ~prev)
        for prev, cur in zip(levels, levels[1:]):
            for i, m in cur.items():
                if i in prev:
                    assert not np.any(m & ~prev[i])


def test_global_set_is_intersection_of_levels():
    policy, masks, levels = run_trace("sols_known", 0)
    for prev, cur, lv in zip(masks, masks[1:], levels[1:]):
        expect = prev.copy()
        for m in lv.values():
            expect &= m
        assert np.array_equal(cur, expect)


def test_band_membership_audit():
    delta = P.delta
    clean = 0
    seeds = range(20)
    for seed in seeds:
        _, _, levels = run_trace("sols_unknown", seed, horizon=150)
        clean += all(m[0] for lv in levels for m in lv.values())
    assert clean / len(seeds) >= 1 - delta
