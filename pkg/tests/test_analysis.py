"""Classification, counts, events, the grid proxy, and the theorem checkers."""

import math

import numpy as np
import pytest

from chainlab.analysis import (
    GoodEvent,
    IntervalCounts,
    IntervalTooShort,
    check_common_prefix,
    check_growth,
    check_quality,
    classify,
    good_event,
    inner_typicality,
    interval_counts,
    min_interval,
    structural_lemmas,
    typical_event_proxy,
)
from chainlab.chain import ADVERSARIAL, HONEST, ChainStore
from chainlab.harness import trial_seed
from chainlab.sim import ProtocolParams, Trace, run_simulation


def hand_trace(params, honest_times, adv=()):
    """Single linear chain with the given honest mining times; ``adv``
    holds (mined, publish) pairs appended after the honest blocks."""
    store = ChainStore(0)
    for t in honest_times:
        store.append(HONEST, len(store) - 1, t, publish_time=t)
    for mined, publish in adv:
        store.append(ADVERSARIAL, len(store) - 1, mined, publish_time=publish)
    return Trace(params, 0, [store])


def naive_flags(times, delta, horizon):
    """Quadratic-scan oracle for the lagger/loner rules."""
    times = [0.0] + list(times)  # genesis is an honest block at time 0
    out = []
    for i, t in enumerate(times[1:], start=1):
        before = [u for j, u in enumerate(times) if j != i and t - delta <= u <= t]
        after = [u for j, u in enumerate(times) if j != i and t <= u <= t + delta]
        lagger = not before
        known = t + delta <= horizon
        out.append((lagger, lagger and not after, known))
    return out


def test_classify_single_block():
    params = ProtocolParams(alpha=1.0, delta_net=0.1, horizon=5.0)
    flags = classify(hand_trace(params, [2.0]))
    assert flags.lagger[0] and flags.loner[0] and flags.loner_known[0]


def test_classify_worked_example():
    params = ProtocolParams(alpha=1.0, delta_net=0.1, horizon=4.0)
    flags = classify(hand_trace(params, [1.0, 1.05, 3.0]))
    assert list(flags.lagger) == [True, False, True]
    assert list(flags.loner) == [False, False, True]
    assert list(flags.loner_known) == [True, True, True]


def test_classify_horizon_truncation():
    params = ProtocolParams(alpha=1.0, delta_net=0.5, horizon=3.2)
    flags = classify(hand_trace(params, [1.0, 3.0]))
    assert not flags.loner_known[1]  # trailing window runs past the horizon
    assert flags.loner_known[0]


def test_classify_against_quadratic_oracle():
    params = ProtocolParams(alpha=1.0, delta_net=0.3, horizon=200.0)
    trace = run_simulation(params, seed=23)
    flags = classify(trace)
    oracle = naive_flags(flags.times, 0.3, 200.0)
    for i, (lag, lone, known) in enumerate(oracle):
        assert flags.lagger[i] == lag
        assert flags.loner_known[i] == known
        if known:
            assert flags.loner[i] == lone


def test_loner_is_product_of_neighbor_laggers():
    params = ProtocolParams(alpha=2.0, delta_net=0.2, horizon=300.0)
    flags = classify(run_simulation(params, seed=5))
    u = flags.lagger
    for i in range(len(u) - 1):
        assert flags.loner[i] == (u[i] and u[i + 1])


def test_lagger_frequency_small_monte_carlo():
    params = ProtocolParams(alpha=1.0, delta_net=0.3, horizon=10000.0)
    flags = classify(run_simulation(params, seed=77))
    n = len(flags.times)
    g = math.exp(-0.3)
    band = 4.0 * math.sqrt(g * (1 - g) / n)
    assert abs(flags.lagger.mean() - g) <= band


def test_interval_counts_conventions():
    params = ProtocolParams(alpha=1.0, delta_net=0.1, horizon=4.0)
    trace = hand_trace(params, [1.0, 1.05, 3.0])
    assert interval_counts(trace, 0, 2.0, 2.0) == IntervalCounts(0, 0, 0, 0)
    assert interval_counts(trace, 0, 3.0, 2.0) == IntervalCounts(0, 0, 0, 0)
    assert interval_counts(trace, 0, 0.0, 2.0) == IntervalCounts(2, 1, 0, 0)


def test_interval_counts_additive_over_partition():
    params = ProtocolParams(alpha=2.0, beta=0.7, delta_net=0.2, horizon=100.0)
    trace = run_simulation(params, strategy="selfish-mining", seed=9)
    cuts = [0.0, 13.7, 28.0, 54.2, 80.1, 100.0]
    whole = interval_counts(trace, 0, 0.0, 100.0)
    parts = [interval_counts(trace, 0, a, b) for a, b in zip(cuts, cuts[1:])]
    for field in ("n", "x", "y", "z"):
        assert sum(getattr(p, field) for p in parts) == getattr(whole, field)


def test_good_event_strict_boundaries():
    params = ProtocolParams(alpha=1.0, delta_net=0.0, delta_typ=0.1, horizon=1.0)
    assert good_event(IntervalCounts(100, 99, 99, 0), 0.0, 100.0, params).e1
    assert not good_event(IntervalCounts(90, 99, 99, 0), 0.0, 100.0, params).e1


def test_good_event_adversarial_threshold():
    # g = 0.9 exactly, alpha = 1, delta = 0.1, beta = 0.2 on (0, 100]:
    # the threshold is 20 + 8.1 = 28.1
    params = ProtocolParams(
        alpha=1.0, beta=0.2, delta_net=math.log(1 / 0.9), delta_typ=0.1, horizon=1.0
    )
    assert good_event(IntervalCounts(100, 99, 99, 28), 0.0, 100.0, params).e4
    assert not good_event(IntervalCounts(100, 99, 99, 29), 0.0, 100.0, params).e4


PROXY_PARAMS = ProtocolParams(
    alpha=1.0, beta=0.05, delta_net=0.1, delta_typ=0.45, horizon=450.0
)


def naive_proxy(trace, chain, s, t, params, horizon):
    dj = inner_typicality(params.delta_typ)
    h = int(math.floor(horizon))
    ks = int(math.ceil(s))
    tl = min(int(math.floor(t)), h)
    g = math.exp(-params.alpha * params.delta_net)
    a = params.alpha
    for k in range(0, ks + 1):
        for l in range(tl, h + 1):
            if k >= l:
                continue
            c = interval_counts(trace, chain, k, l)
            dt = l - k
            ok = (
                (1 - dj) * dt * a < c.n < (1 + dj) * dt * a
                and (1 - dj) * dt * g * a < c.x
                and (1 - dj) * dt * g * g * a < c.y
                and c.z < dt * params.beta + dt * g * g * a * dj
            )
            if not ok:
                return False
    return True


def test_proxy_matches_naive_grid():
    for seed, pair in [(3, (0.0, 250.0)), (4, (20.3, 260.7)), (5, (50.0, 430.0))]:
        trace = run_simulation(PROXY_PARAMS, strategy="selfish-mining", seed=seed)
        fast = typical_event_proxy(trace, 0, *pair)
        assert fast == naive_proxy(trace, 0, *pair, PROXY_PARAMS, 450.0)


def test_proxy_false_case_matches_naive():
    # starve the chain of loners with clustered mining so some grid pair fails
    params = ProtocolParams(alpha=1.0, beta=0.0, delta_net=0.4, delta_typ=0.45, horizon=260.0)
    times = []
    t = 0.5
    while t < 255.0:
        times.extend([t, t + 0.05, t + 0.10])
        t += 3.0
    trace = hand_trace(params, times)
    fast = typical_event_proxy(trace, 0, 2.0, 255.0)
    assert fast == naive_proxy(trace, 0, 2.0, 255.0, params, 260.0) == False


def test_proxy_degenerate_single_column():
    trace = run_simulation(PROXY_PARAMS, seed=6)
    assert isinstance(typical_event_proxy(trace, 0, 0.0, 450.0), bool)


def test_proxy_interval_too_short():
    trace = run_simulation(PROXY_PARAMS, seed=6)
    with pytest.raises(IntervalTooShort):
        typical_event_proxy(trace, 0, 0.0, min_interval(PROXY_PARAMS) - 1.0)


def test_proxy_implies_good_event_on_sampled_pairs():
    rng = np.random.default_rng(0)
    found = 0
    for seed in range(6):
        trace = run_simulation(PROXY_PARAMS, strategy="selfish-mining", seed=seed)
        s, t = 30.0, 280.0
        if not typical_event_proxy(trace, 0, s, t):
            continue
        found += 1
        for _ in range(50):
            a = float(rng.uniform(0.0, s))
            b = float(rng.uniform(t, PROXY_PARAMS.horizon))
            counts = interval_counts(trace, 0, a, b)
            assert good_event(counts, a, b, PROXY_PARAMS).ok
    assert found >= 4  # the proxy held often enough for the test to bite


def test_check_growth_from_time_zero():
    params = ProtocolParams(alpha=1.0, beta=0.05, delta_net=0.1, delta_typ=0.45, horizon=500.0)
    trace = run_simulation(params, seed=14)
    res = check_growth(trace, 0, 0.0, 420.0)
    assert res.event_held and res.predicate_held
    with pytest.raises(IntervalTooShort):
        check_growth(trace, 0, 0.0, 100.0)


def test_check_growth_matches_credible_set_enumeration():
    params = ProtocolParams(alpha=1.0, beta=0.5, delta_net=0.2, delta_typ=0.45, horizon=400.0)
    from chainlab.bounds import derive

    d = derive(params.alpha, params.delta_net, params.delta_typ)
    for seed in range(5):
        trace = run_simulation(params, strategy="selfish-mining", seed=seed)
        store = trace.store()
        s, t = 10.0, 350.0
        res = check_growth(trace, 0, s, t)
        lo = min(store.height[b] for b in store.credible_tips(t, params.delta_net))
        hi = max(store.height[b] for b in store.credible_tips(s, params.delta_net))
        expected = lo >= hi + d.growth_coeff * d.g * params.alpha * (t - s)
        assert res.predicate_held == expected


def test_check_growth_event_fails_on_clustered_trace():
    # bursts of tightly spaced honest blocks leave too few laggers: e2 fails
    params = ProtocolParams(alpha=1.0, beta=0.0, delta_net=0.4, delta_typ=0.45, horizon=460.0)
    times = []
    t = 0.5
    while t < 450.0:
        times.extend([t, t + 0.05, t + 0.1])
        t += 3.0
    trace = hand_trace(params, times)
    res = check_growth(trace, 0, 0.0, 440.0)
    assert not res.event_held
    counts = interval_counts(trace, 0, 0.4, 439.6)
    assert not good_event(counts, 0.4, 439.6, params).e2


def test_check_quality_all_honest():
    params = ProtocolParams(alpha=1.0, beta=0.05, delta_net=0.1, delta_typ=0.45, horizon=900.0)
    trace = run_simulation(params, seed=2)
    res = check_quality(trace, 0, 830.0, 400)
    assert res.event_held and res.predicate_held and res.preconditions_ok


def test_check_quality_crafted_violation():
    params = ProtocolParams(alpha=1.0, beta=5.0, delta_net=0.1, delta_typ=0.45, horizon=40.0)
    honest = [float(i) for i in range(1, 6)]
    adv = [(5.0 + 0.1 * i, 5.0 + 0.1 * i) for i in range(1, 11)]
    trace = hand_trace(params, honest, adv)
    res = check_quality(trace, 0, 30.0, 10)
    assert not res.predicate_held  # ten adversarial blocks cap the last ten
    assert not res.preconditions_ok


def test_check_common_prefix_single_chain():
    params = ProtocolParams(alpha=1.0, beta=0.0, delta_net=0.1, delta_typ=0.45, horizon=900.0)
    trace = run_simulation(params, seed=4)
    res = check_common_prefix(trace, 0, 830.0, 400, r_grid=[860.0])
    assert res.predicate_held


def test_check_common_prefix_detects_overtake():
    # far-superior adversarial rate plus a shallow confirmation depth: the
    # checker must be able to report violations
    params = ProtocolParams(alpha=1.0, beta=1.5, delta_net=0.0, delta_typ=0.45, horizon=150.0)
    violations = 0
    for i in range(30):
        trace = run_simulation(
            params,
            strategy={"name": "private-chain", "params": {"k_confirm": 2}},
            seed=trial_seed(3, i),
        )
        for t in (2.0, 4.0, 8.0, 16.0, 32.0):
            res = check_common_prefix(trace, 0, t, 2)
            violations += not res.predicate_held
            assert not res.preconditions_ok  # k is far below the depth minimum
    assert violations >= 1


def test_structural_lemmas_hold_on_simulated_traces():
    params = ProtocolParams(alpha=1.0, beta=0.8, delta_net=0.2, horizon=120.0)
    for name in ("null", "private-chain", "selfish-mining"):
        trace = run_simulation(params, strategy=name, seed=1)
        assert all(structural_lemmas(trace, 0).values())


def test_structural_lemmas_single_block_trace():
    params = ProtocolParams(alpha=1.0, delta_net=0.2, horizon=5.0)
    assert all(structural_lemmas(hand_trace(params, [1.0]), 0).values())


def test_structural_negative_control():
    # an "honest" block that ignores credibility forks at height 1 long after
    # the chain moved on: two laggers share a height
    params = ProtocolParams(alpha=1.0, delta_net=0.2, horizon=20.0)
    store = ChainStore(0)
    store.append(HONEST, 0, 1.0, publish_time=1.0)
    store.append(HONEST, 1, 2.0, publish_time=2.0)
    store.append(HONEST, 0, 8.0, publish_time=8.0)  # rule violation: extends genesis
    trace = Trace(params, 0, [store])
    assert not structural_lemmas(trace, 0)["distinct_lagger_heights"]
