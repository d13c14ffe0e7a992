"""Exact-formula tests for the closed-form quantities and bounds.

Frozen expected values were computed independently with mpmath at 40
digits and are asserted here against the float implementation.
"""

import math

import pytest

from chainlab.bounds import (
    DELTA_TYP_MAX,
    EpsilonTooLarge,
    InvalidDelta,
    admissible,
    depth_bound,
    derive,
    event_bounds,
    prism_leader_time,
    prism_tx_time,
    reference_notes,
)

# worked-example point: 6 blocks/hr, 2 s of delay, typicality 0.3285
ALPHA, DELTA_NET, DELTA_TYP = 6.0, 1.0 / 1800.0, 0.3285

# mpmath, 40 digits
G_EXACT = 0.9966722160545233215202027279817219933789
ETA_EXACT = 0.6431713663792190255396887131713416049899
MU_EXACT = 17034.6139303175640164462613013858549808
LHS_EXACT = 1.995378039302144006012927494893772742025
DEPTH_PUBLISHED_MU = 7.760707274239890474037137168416810665051e-21
DEPTH_FORMULA_MU = 6.551072955544285916906771875155901926597e-19
GOOD_ETA065_DT100 = 0.5998301447082145932341572318886698742987


def test_zero_delay_limit():
    d = derive(2.0, 0.0, 0.3)
    assert d.g == 1.0
    assert d.eta == pytest.approx(0.3 ** 2 * 2.0, rel=1e-15)
    assert d.growth_coeff == pytest.approx(1 - 41 * 0.3 / 40, rel=1e-15)


def test_worked_example_point():
    d = derive(ALPHA, DELTA_NET, DELTA_TYP)
    assert d.g == pytest.approx(G_EXACT, rel=1e-12)
    assert d.g == pytest.approx(math.exp(-1.0 / 300.0), rel=1e-12)
    assert d.eta == pytest.approx(ETA_EXACT, rel=1e-12)
    assert d.mu == pytest.approx(MU_EXACT, rel=1e-9)


def test_mu_hand_value():
    # eta = 27*ln 2 makes the prefactor exactly 9*4/(1/2)^2 = 144
    delta = 0.25
    alpha = 27.0 * math.log(2.0) / delta ** 2
    d = derive(alpha, 0.0, delta)
    assert d.eta == pytest.approx(27.0 * math.log(2.0), rel=1e-12)
    assert d.mu == pytest.approx(144.0, rel=1e-9)


def test_invalid_delta():
    for bad in (0.0, -0.1, DELTA_TYP_MAX, 0.6):
        with pytest.raises(InvalidDelta):
            derive(1.0, 0.0, bad)
        with pytest.raises(InvalidDelta):
            admissible(1.0, 0.0, 0.0, bad)


def test_admissible_zero_beta():
    assert admissible(1.0, 0.0, 0.1, 0.3).ok


def test_admissible_worked_example():
    adm = admissible(ALPHA, 2.0, DELTA_NET, DELTA_TYP)
    assert adm.lhs == pytest.approx(LHS_EXACT, rel=1e-12)
    assert not adm.ok  # the margin falls just short of 2 blocks/hr


def test_admissible_vanishing_margin():
    adm = admissible(1.0, 1e-6, 0.0, DELTA_TYP_MAX - 1e-12)
    assert adm.lhs < 1e-10
    assert not adm.ok


def test_event_bounds_vacuous_flag():
    d = derive(ALPHA, DELTA_NET, DELTA_TYP)
    ev = event_bounds(d, 0.0, 1e-9)
    assert ev.good == pytest.approx(9.0, rel=1e-6)
    assert ev.good_vacuous and ev.typical_vacuous


def test_event_bounds_values_and_monotonicity():
    d = derive(ALPHA, DELTA_NET, DELTA_TYP).with_mu(201.8)
    object.__setattr__  # frozen dataclass; build a synthetic eta=0.65 variant instead
    from chainlab.bounds import DerivedParams

    d65 = DerivedParams(g=d.g, eta=0.65, mu=d.mu, growth_coeff=d.growth_coeff)
    assert event_bounds(d65, 0.0, 100.0).good == pytest.approx(GOOD_ETA065_DT100, rel=1e-12)
    prev = math.inf
    for dt in (10.0, 20.0, 50.0, 100.0, 400.0):
        ev = event_bounds(d65, 0.0, dt)
        assert ev.good < prev
        prev = ev.good


def test_depth_bound_worked_example():
    d = derive(ALPHA, DELTA_NET, DELTA_TYP)
    published = depth_bound(d.with_mu(201.8), ALPHA, 26000, DELTA_NET)
    assert published == pytest.approx(DEPTH_PUBLISHED_MU, rel=1e-9)
    assert published < 1e-20
    ours = depth_bound(d, ALPHA, 26000, DELTA_NET)
    assert ours == pytest.approx(DEPTH_FORMULA_MU, rel=1e-9)


def test_depth_bound_vacuous_point_and_doubling():
    alpha, delta = 2.0, 0.25
    d = derive(alpha, delta, 0.3)
    k0 = int(4 * alpha * delta)  # exponent exactly zero
    assert depth_bound(d, alpha, k0, delta) == pytest.approx(d.mu, rel=1e-12)
    for k in (40, 80, 160):
        ratio = depth_bound(d, alpha, 2 * k, delta) / depth_bound(d, alpha, k, delta)
        assert ratio == pytest.approx(math.exp(-(d.eta / 27.0) * k / (2 * alpha)), rel=1e-9)


def test_leader_time_epsilon_boundary():
    d = derive(ALPHA, DELTA_NET, DELTA_TYP)
    m = 100
    ceiling = m * d.mu * math.exp(-3 * (1 + DELTA_NET) * DELTA_TYP * d.g ** 2 * ALPHA)
    with pytest.raises(EpsilonTooLarge):
        prism_leader_time(0.0, ceiling, m, d, ALPHA, DELTA_NET)
    t = prism_leader_time(0.0, 1e-9, m, d, ALPHA, DELTA_NET)
    assert math.isfinite(t) and t > 0


def test_leader_time_halving_increment():
    d = derive(ALPHA, DELTA_NET, DELTA_TYP)
    m = 100
    t1 = prism_leader_time(5.0, 1e-9, m, d, ALPHA, DELTA_NET)
    t2 = prism_leader_time(5.0, 5e-10, m, d, ALPHA, DELTA_NET)
    denom = d.growth_coeff * (1 - d.g) * d.g * ALPHA
    expected = (54.0 * ALPHA / d.eta) * math.log(2.0) / denom
    assert t2 - t1 == pytest.approx(expected, rel=1e-9)


def test_leader_time_zero_delay_diverges():
    d = derive(2.0, 0.0, 0.3)
    assert math.isinf(prism_leader_time(0.0, 1e-9, 10, d, 2.0, 0.0))


def test_tx_time_depth_exceeds_leader_depth():
    d = derive(ALPHA, DELTA_NET, DELTA_TYP)
    m, eps = 100, 1e-9
    k_tx, _ = prism_tx_time(0.0, eps, m, d, ALPHA, DELTA_NET)
    k_leader = math.ceil(
        (54.0 * ALPHA / d.eta) * math.log(m * d.mu / eps) + 4 * ALPHA * DELTA_NET
    )
    assert k_tx >= k_leader


def test_tx_time_linear_in_depth():
    d = derive(ALPHA, DELTA_NET, DELTA_TYP)
    pts = [prism_tx_time(3.0, eps, 10, d, ALPHA, DELTA_NET) for eps in (1e-6, 1e-9, 1e-12)]
    slopes = [
        (pts[i + 1][1] - pts[i][1]) / (pts[i + 1][0] - pts[i][0]) for i in range(len(pts) - 1)
    ]
    assert slopes[0] == pytest.approx(slopes[1], rel=1e-9)


def test_tx_time_bound_meets_budget():
    d = derive(ALPHA, DELTA_NET, DELTA_TYP)
    for eps in (1e-6, 1e-10):
        k, _ = prism_tx_time(0.0, eps, 10, d, ALPHA, DELTA_NET)
        bound = 11 * d.mu * math.exp(-(d.eta / 27.0) * (k / (2 * ALPHA) - 2 * DELTA_NET))
        assert bound <= eps


def test_reference_notes():
    notes = reference_notes(ALPHA, 2.0, DELTA_NET, DELTA_TYP)
    assert len(notes) == 3
    assert any("201.8" in n and "not reproduced" in n for n in notes)
    assert reference_notes(1.0, 0.0, 0.0, 0.3) == []
